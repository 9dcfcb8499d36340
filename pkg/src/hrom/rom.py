"""POD basis construction and the reduced Newton step solve.

The reduced model solves phi^T rbar(w_ref + phi what) = 0 per time step,
where rbar is the residual optionally premultiplied by a test map (Galerkin
when the map is absent). The reduced Jacobian phi^T J phi is assembled
explicitly; problem sizes here never justify a matrix-free path.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import pseudoinverse_apply, qr_column_pivot, thin_svd


class RomNewtonError(RuntimeError):
    """Reduced Newton hit its iteration cap; carries the best iterate."""

    def __init__(self, message, best=None, step=None):
        super().__init__(message)
        self.best = best
        self.step = step


@dataclass(frozen=True)
class PodBasis:
    reference_state: np.ndarray
    vectors: np.ndarray
    singular_values: np.ndarray


@dataclass(frozen=True)
class RomStepSolution:
    coords: np.ndarray
    newton_iters: int
    reduced_residual_norm: float
    full_residual_norm: float


def build_pod(snapshots, p0, w_ref):
    """Leading left singular vectors of the reference-subtracted snapshots.

    p0 greater than the numerical rank is truncated to the rank with a
    warning; p0 < 1 is rejected.
    """
    if p0 < 1:
        raise ValueError("p0 must be >= 1")
    snapshots = np.asarray(snapshots, dtype=float)
    w_ref = np.asarray(w_ref, dtype=float)
    centered = snapshots - w_ref[:, None]
    svd = thin_svd(centered)
    s = svd.singular_values
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    if rank == 0:
        raise ValueError("snapshot matrix has rank 0, no basis to build")
    if p0 > rank:
        warnings.warn(
            f"requested {p0} vectors but snapshots have rank {rank}; truncating",
            stacklevel=2,
        )
        p0 = rank
    return PodBasis(
        reference_state=w_ref.copy(),
        vectors=svd.left_vectors[:, :p0],
        singular_values=s[:p0].copy(),
    )


def snapshot_rank(snapshots, w_ref):
    """Numerical rank of the reference-subtracted snapshot matrix (the
    'no truncation' basis size)."""
    centered = np.asarray(snapshots, dtype=float) - np.asarray(w_ref, dtype=float)[:, None]
    s = thin_svd(centered).singular_values
    return int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0


def solve_rom_step(fom, n, basis, w_ref, coords_init, w_prev, mu, tol,
                   test_map=None, max_iter=25, full_tol=None):
    """Newton on the reduced step system.

    Terminates when ||phi^T rbar|| <= tol; when full_tol is given the full
    residual norm must also drop below it (used when a fully split basis
    makes the reduced solve equivalent to the full-order solve). Reports
    both norms at the solution.

    Refinement can leave phi with nearly dependent, weakly scaled columns.
    Two safeguards keep the solve meaningful there, and both reduce to the
    textbook iteration when the columns are orthonormal. First, the Newton
    direction is computed in an orthonormal basis for the column span (the
    same state move in exact arithmetic, without squaring the basis
    conditioning into the reduced system) and mapped back as the
    minimum-norm coordinate increment, keeping coordinate magnitudes tied
    to the state they represent. Second, termination also requires the
    span-system residual ||q^T rbar|| to meet tol: ||phi^T rbar|| alone
    collapses with the column norms, which would accept states whose
    in-span residual is still large.
    """
    phi = basis.phi
    coords = np.asarray(coords_init, dtype=float).copy()
    span = qr_column_pivot(phi, 1e-12)
    qb = span.q[:, :span.numerical_rank]

    def evaluate(c):
        w = w_ref + phi @ c
        r = fom.residual(n, w, w_prev, mu)
        rbar = r if test_map is None else test_map.T @ r
        return w, rbar, phi.T @ rbar

    w, rbar, red = evaluate(coords)
    red_norm = np.linalg.norm(red)
    full_norm = np.linalg.norm(rbar)
    iters = 0
    while True:
        if (red_norm <= tol and np.linalg.norm(qb.T @ rbar) <= tol
                and (full_tol is None or full_norm <= full_tol)):
            return RomStepSolution(coords=coords, newton_iters=iters,
                                   reduced_residual_norm=red_norm,
                                   full_residual_norm=full_norm)
        if iters >= max_iter:
            best = RomStepSolution(coords=coords, newton_iters=iters,
                                   reduced_residual_norm=red_norm,
                                   full_residual_norm=full_norm)
            raise RomNewtonError(
                f"reduced Newton stalled at ||phi^T rbar|| = {red_norm:.3e}",
                best=best, step=n,
            )
        jac = fom.jacobian(n, w, w_prev, mu)
        jbar = jac if test_map is None else test_map.T @ jac
        jq = qb.T @ jbar @ qb
        eta = np.linalg.solve(jq, -(qb.T @ rbar))
        delta = pseudoinverse_apply(phi, qb @ eta)
        # The direction is Newton for the span system q^T rbar = 0; use that
        # norm as the line-search merit (the termination checks above stay on
        # the reported norms, which it drives to zero alongside).
        merit = full_norm if full_tol is not None else np.linalg.norm(qb.T @ rbar)
        step = 1.0
        improved = False
        for _ in range(30):
            trial = coords + step * delta
            w_t, rbar_t, red_t = evaluate(trial)
            trial_merit = (np.linalg.norm(rbar_t) if full_tol is not None
                           else np.linalg.norm(qb.T @ rbar_t))
            if trial_merit < merit:
                improved = True
                break
            step *= 0.5
        if not improved:
            best = RomStepSolution(coords=coords, newton_iters=iters,
                                   reduced_residual_norm=red_norm,
                                   full_residual_norm=full_norm)
            raise RomNewtonError(
                f"reduced Newton made no progress at ||phi^T rbar|| = "
                f"{red_norm:.3e}", best=best, step=n,
            )
        coords, w, rbar, red = trial, w_t, rbar_t, red_t
        red_norm = np.linalg.norm(red)
        full_norm = np.linalg.norm(rbar)
        iters += 1
