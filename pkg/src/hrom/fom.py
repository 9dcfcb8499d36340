"""Full-order models.

The abstract contract is one implicit time step: given the previous state,
a residual r(w) whose root is the new state, its Jacobian, and a scalar
output of interest with gradient. Two instances live here: the parameterized
inviscid Burgers benchmark (Godunov flux, implicit Euler, exponential source)
and a steady linear system used heavily by the tests.
"""

import abc
from dataclasses import dataclass

import numpy as np


class NewtonError(RuntimeError):
    """Newton failed to reach tolerance within the iteration cap."""

    def __init__(self, message, step=None, best=None, residual_norm=None):
        super().__init__(message)
        self.step = step
        self.best = best
        self.residual_norm = residual_norm


class FomProblem(abc.ABC):
    """Residual/Jacobian/output contract for one implicit step.

    All operations are pure functions of (step index, state, previous
    state, parameters). The output pair must be consistent: the gradient is
    the exact derivative of the output w.r.t. the current state.
    """

    n_dofs: int
    n_steps: int

    @abc.abstractmethod
    def residual(self, n, w, w_prev, mu):
        ...

    @abc.abstractmethod
    def jacobian(self, n, w, w_prev, mu):
        ...

    @abc.abstractmethod
    def output(self, n, w, w_prev, mu):
        ...

    @abc.abstractmethod
    def output_gradient(self, n, w, w_prev, mu):
        ...


@dataclass(frozen=True)
class BurgersConfig:
    n_cells: int = 250
    domain_length: float = 100.0
    dt: float = 0.05
    n_steps: int = 1000
    source_coeff: float = 0.02
    cell_centered: bool = True  # source evaluated at cell centers, else at nodes
    newton_tol: float = 1e-10
    newton_max_iter: int = 25

    @property
    def dx(self):
        return self.domain_length / self.n_cells


def godunov_flux(u_left, u_right):
    """Exact-Riemann interface flux for f(u) = u^2/2.

    For the convex flux this closed form covers every case: minimum of f
    over [u_left, u_right] when u_left <= u_right, maximum over the
    reversed interval otherwise.
    """
    a = max(u_left, 0.0)
    b = min(u_right, 0.0)
    return max(a * a, b * b) / 2.0


def _godunov_vec(ul, ur):
    a = np.maximum(ul, 0.0)
    b = np.minimum(ur, 0.0)
    return np.maximum(a * a, b * b) / 2.0


def _godunov_derivs(ul, ur):
    # One-sided at ties: the left branch wins.
    a = np.maximum(ul, 0.0)
    b = np.minimum(ur, 0.0)
    left = a * a >= b * b
    return np.where(left, a, 0.0), np.where(left, 0.0, b)


class BurgersProblem(FomProblem):
    """du/dt + d(u^2/2)/dx = source_coeff * exp(mu2 * x) on [0, L],
    u(0, t) = mu1, u(x, 0) = 1, finite-volume Godunov discretization with
    implicit Euler steps."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.n_dofs = cfg.n_cells
        self.n_steps = cfg.n_steps
        i = np.arange(cfg.n_cells)
        self.x = (i + 0.5) * cfg.dx if cfg.cell_centered else (i + 1) * cfg.dx

    def initial_state(self):
        return np.ones(self.n_dofs)

    def _interface_states(self, w, mu1):
        # Interfaces 0..N: inflow ghost value on the left, copy-out on the
        # right (the outflow flux is replaced by the upwind f(w_N) below).
        ul = np.concatenate(([mu1], w))
        ur = np.concatenate((w, [w[-1]]))
        return ul, ur

    def residual(self, n, w, w_prev, mu):
        w = np.asarray(w, dtype=float)
        w_prev = np.asarray(w_prev, dtype=float)
        if w.shape != (self.n_dofs,) or w_prev.shape != (self.n_dofs,):
            raise ValueError("state length mismatch")
        cfg = self.cfg
        mu1, mu2 = mu
        ul, ur = self._interface_states(w, mu1)
        flux = _godunov_vec(ul, ur)
        flux[-1] = 0.5 * w[-1] ** 2
        src = cfg.source_coeff * np.exp(mu2 * self.x)
        return w - w_prev + (cfg.dt / cfg.dx) * (flux[1:] - flux[:-1]) - cfg.dt * src

    def jacobian(self, n, w, w_prev, mu):
        w = np.asarray(w, dtype=float)
        cfg = self.cfg
        mu1, _ = mu
        ul, ur = self._interface_states(w, mu1)
        dfl, dfr = _godunov_derivs(ul, ur)
        dfl[-1] = w[-1]  # outflow flux f(w_N) depends on the last cell only
        dfr[-1] = 0.0
        lam = cfg.dt / cfg.dx
        n_c = self.n_dofs
        jac = np.zeros((n_c, n_c))
        idx = np.arange(n_c)
        # r_i involves flux[i+1] (left state w_i, right state w_{i+1}) and
        # flux[i] (left state w_{i-1}, right state w_i).
        jac[idx, idx] = 1.0 + lam * (dfl[1:] - dfr[:-1])
        jac[idx[1:], idx[:-1]] = -lam * dfl[1:-1]
        jac[idx[:-1], idx[1:]] = lam * dfr[1:-1]
        return jac

    def output(self, n, w, w_prev, mu):
        """Squared norm of the step residual, the refinement driver's
        output of interest."""
        r = self.residual(n, w, w_prev, mu)
        return float(r @ r)

    def output_gradient(self, n, w, w_prev, mu):
        r = self.residual(n, w, w_prev, mu)
        return 2.0 * (r @ self.jacobian(n, w, w_prev, mu))


class LinearProblem(FomProblem):
    """Steady linear system r(w) = b - A w, single step.

    The output defaults to the squared residual norm; pass `output_vector`
    for a linear functional c^T w instead.
    """

    def __init__(self, a, b, output_vector=None):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = None if output_vector is None else np.asarray(output_vector, dtype=float)
        self.n_dofs = self.a.shape[0]
        self.n_steps = 1

    def residual(self, n, w, w_prev, mu):
        return self.b - self.a @ w

    def jacobian(self, n, w, w_prev, mu):
        return -self.a

    def output(self, n, w, w_prev, mu):
        if self.c is not None:
            return float(self.c @ w)
        r = self.residual(n, w, w_prev, mu)
        return float(r @ r)

    def output_gradient(self, n, w, w_prev, mu):
        if self.c is not None:
            return self.c.copy()
        r = self.residual(n, w, w_prev, mu)
        return 2.0 * (r @ self.jacobian(n, w, w_prev, mu))

    def direct_solve(self):
        return np.linalg.solve(self.a, self.b)


def newton_solve(residual_fn, jacobian_fn, w0, tol, max_iter):
    """Newton with a 50% step-halving line search on the residual norm.

    Returns (w, iterations). Raises NewtonError when the cap is hit with
    the norm still above tolerance.
    """
    w = np.asarray(w0, dtype=float).copy()
    r = residual_fn(w)
    norm = np.linalg.norm(r)
    for it in range(max_iter):
        if norm <= tol:
            return w, it
        delta = np.linalg.solve(jacobian_fn(w), -r)
        step = 1.0
        for _ in range(30):
            trial = w + step * delta
            r_trial = residual_fn(trial)
            norm_trial = np.linalg.norm(r_trial)
            if norm_trial < norm:
                break
            step *= 0.5
        w, r, norm = trial, r_trial, norm_trial
    if norm <= tol:
        return w, max_iter
    raise NewtonError(
        f"Newton stalled at residual norm {norm:.3e} (tol {tol:.1e})",
        best=w, residual_norm=norm,
    )


def solve_fom(cfg, mu, n_steps=None):
    """March the Burgers problem; returns the (n_cells, n_steps) trajectory
    of computed steps 1..n_steps (the all-ones initial state is not stored)."""
    problem = BurgersProblem(cfg)
    n_steps = cfg.n_steps if n_steps is None else n_steps
    states = np.empty((cfg.n_cells, n_steps))
    w_prev = problem.initial_state()
    for n in range(1, n_steps + 1):
        try:
            w, _ = newton_solve(
                lambda w: problem.residual(n, w, w_prev, mu),
                lambda w: problem.jacobian(n, w, w_prev, mu),
                w_prev, cfg.newton_tol, cfg.newton_max_iter,
            )
        except NewtonError as err:
            err.step = n
            raise
        states[:, n - 1] = w
        w_prev = w
    return states
