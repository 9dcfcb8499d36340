"""Dual-weighted-residual error indicators.

The output error a candidate refinement could remove is estimated from a
coarse adjoint solve: solve the p-dimensional transposed-Jacobian system
against the output gradient, prolong the adjoint to the fine space, and
weight each fine column's residual projection by its adjoint entry. Only
the coarse (p-dimensional) system is ever solved online; the fine adjoint
appears in the test suite as an oracle.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import pseudoinverse_apply, qr_column_pivot
from .splitting import fine_basis, prolong


class AdjointSingularError(RuntimeError):
    """The reduced transposed-Jacobian system was singular; the caller
    skips refinement for this attempt."""


@dataclass(frozen=True)
class AdjointSolution:
    coarse: np.ndarray
    prolonged: np.ndarray


@dataclass(frozen=True)
class ErrorIndicators:
    """Nonnegative indicators, one per fine column, in parent-child layout."""

    flat: np.ndarray
    cmap: object  # ChildIndexMap

    def by_parent(self, i):
        off = self.cmap.offsets
        return self.flat[off[i]:off[i + 1]]

    def parent_sums(self):
        p = len(self.cmap.n_children)
        sums = np.zeros(p)
        off = self.cmap.offsets
        for i in range(p):
            sums[i] = self.flat[off[i]:off[i + 1]].sum()
        return sums


def _coarse_adjoint_vector(fom, n, basis, w, w_prev, mu, test_map=None):
    """Adjoint coordinates solving phi^T jbar^T phi y = phi^T grad.

    The system is assembled in an orthonormal basis for the column span and
    mapped back as the minimum-norm coordinate vector. For a full-rank phi
    this is exactly the plain solve; for the nearly dependent columns that
    refinement produces it avoids squaring their conditioning into the
    adjoint, which would poison the indicator weights.
    """
    jac = fom.jacobian(n, w, w_prev, mu)
    jbar = jac if test_map is None else test_map.T @ jac
    grad = np.asarray(fom.output_gradient(n, w, w_prev, mu), dtype=float)
    phi = basis.phi
    span = qr_column_pivot(phi, 1e-12)
    qb = span.q[:, :span.numerical_rank]
    lhs = qb.T @ jbar.T @ qb
    rhs = qb.T @ grad
    try:
        eta = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as err:
        raise AdjointSingularError(f"coarse adjoint system singular: {err}") from err
    if not np.all(np.isfinite(eta)):
        raise AdjointSingularError("coarse adjoint solve produced non-finite values")
    return pseudoinverse_apply(phi, qb @ eta)


def solve_coarse_adjoint(fom, n, basis, w_ref, coords, w_prev, mu, test_map=None):
    """Solve phi^T Jbar^T phi y = phi^T grad(g)^T at the coarse solution and
    prolong y onto the fine space."""
    w = w_ref + basis.phi @ np.asarray(coords, dtype=float)
    y = _coarse_adjoint_vector(fom, n, basis, w, w_prev, mu, test_map)
    _, _, p_op = fine_basis(basis)
    return AdjointSolution(coarse=y, prolonged=prolong(y, p_op))


def compute_indicators(fom, n, basis, w_ref, coords, w_prev, mu, test_map=None):
    """Indicators e_k = |(P y)_k * phi_fine_k^T rbar| at the coarse solution.

    Returns (indicators, phi_fine, prolongation). An all-leaf basis yields
    an empty fine basis and empty indicators (nothing can be refined).
    Adjoint failure propagates as AdjointSingularError.
    """
    phi_fine, cmap, p_op = fine_basis(basis)
    if p_op.n_fine == 0:
        return ErrorIndicators(flat=np.zeros(0), cmap=cmap), phi_fine, p_op
    w = w_ref + basis.phi @ np.asarray(coords, dtype=float)
    y = _coarse_adjoint_vector(fom, n, basis, w, w_prev, mu, test_map)
    r = fom.residual(n, w, w_prev, mu)
    rbar = r if test_map is None else test_map.T @ r
    flat = np.abs(prolong(y, p_op) * (phi_fine.T @ rbar))
    return ErrorIndicators(flat=flat, cmap=cmap), phi_fine, p_op
