import numpy as np
import pytest

from conftest import galerkin_solve, random_spd_problem
from hrom.fom import BurgersConfig, BurgersProblem, newton_solve
from hrom.rom import RomNewtonError, build_pod, snapshot_rank, solve_rom_step
from hrom.splitting import RefinedBasis
from hrom.tree import build_tree


class TestBuildPod:
    def test_orthonormal_descending(self):
        rng = np.random.default_rng(40)
        snaps = rng.standard_normal((12, 8))
        w_ref = rng.standard_normal(12)
        pod = build_pod(snaps, 5, w_ref)
        phi = pod.vectors
        assert phi.shape == (12, 5)
        assert np.allclose(phi.T @ phi, np.eye(5), atol=1e-12)
        assert np.all(np.diff(pod.singular_values) <= 0)

    def test_reference_subtraction(self):
        # snapshots equal to w_ref plus a rank-one perturbation
        rng = np.random.default_rng(41)
        w_ref = rng.standard_normal(10)
        direction = rng.standard_normal(10)
        coeffs = rng.standard_normal(6)
        snaps = w_ref[:, None] + np.outer(direction, coeffs)
        with pytest.warns(UserWarning):
            pod = build_pod(snaps, 3, w_ref)
        assert pod.vectors.shape == (10, 1)
        cosine = abs(pod.vectors[:, 0] @ direction) / np.linalg.norm(direction)
        assert cosine == pytest.approx(1.0, abs=1e-10)

    def test_truncation_to_rank_warns(self):
        rng = np.random.default_rng(42)
        snaps = rng.standard_normal((8, 3))
        w_ref = np.zeros(8)
        with pytest.warns(UserWarning, match="rank"):
            pod = build_pod(snaps, 7, w_ref)
        assert pod.vectors.shape[1] == 3

    def test_rejects_degenerate_inputs(self):
        with pytest.raises(ValueError):
            build_pod(np.ones((4, 2)), 0, np.zeros(4))
        with pytest.raises(ValueError):
            build_pod(np.zeros((4, 2)), 1, np.zeros(4))

    def test_snapshot_rank(self):
        rng = np.random.default_rng(43)
        left = rng.standard_normal((9, 2))
        right = rng.standard_normal((2, 6))
        assert snapshot_rank(left @ right, np.zeros(9)) == 2


def spd_basis_setup(seed, n=12, p=4):
    rng = np.random.default_rng(seed)
    problem = random_spd_problem(rng, n)
    tree = build_tree(rng.standard_normal((n, 5)), 3, seed=seed)
    phi = np.linalg.qr(rng.standard_normal((n, p)))[0]
    basis = RefinedBasis.fresh(phi, tree)
    w_ref = rng.standard_normal(n)
    return problem, basis, w_ref


class TestSolveRomStep:
    def test_linear_problem_matches_direct_galerkin(self):
        for seed in range(5):
            problem, basis, w_ref = spd_basis_setup(seed)
            sol = solve_rom_step(problem, 0, basis, w_ref,
                                 np.zeros(basis.n_cols), w_ref, None, 1e-12)
            w_direct, coords_direct = galerkin_solve(problem.a, problem.b,
                                                     w_ref, basis.phi)
            assert np.allclose(sol.coords, coords_direct, atol=1e-9)
            w = w_ref + basis.phi @ sol.coords
            r = problem.residual(0, w, w_ref, None)
            assert sol.full_residual_norm == pytest.approx(np.linalg.norm(r),
                                                           abs=1e-12)
            assert sol.reduced_residual_norm <= 1e-12

    def test_square_basis_with_full_tolerance_reproduces_fom(self):
        rng = np.random.default_rng(50)
        problem = random_spd_problem(rng, 8)
        tree = build_tree(rng.standard_normal((8, 4)), 3, seed=0)
        basis = RefinedBasis.fresh(np.eye(8), tree)
        w_ref = np.zeros(8)
        sol = solve_rom_step(problem, 0, basis, w_ref, np.zeros(8), w_ref,
                             None, 1e-6, full_tol=1e-10)
        assert sol.full_residual_norm <= 1e-10
        assert np.allclose(basis.phi @ sol.coords, problem.direct_solve(),
                           atol=1e-8)

    def test_warm_start_at_solution_takes_no_iterations(self):
        problem, basis, w_ref = spd_basis_setup(7)
        first = solve_rom_step(problem, 0, basis, w_ref,
                               np.zeros(basis.n_cols), w_ref, None, 1e-12)
        again = solve_rom_step(problem, 0, basis, w_ref, first.coords,
                               w_ref, None, 1e-12)
        assert again.newton_iters == 0

    def test_iteration_cap_raises_with_best(self):
        problem, basis, w_ref = spd_basis_setup(8)
        with pytest.raises(RomNewtonError) as excinfo:
            solve_rom_step(problem, 0, basis, w_ref, np.zeros(basis.n_cols),
                           w_ref, None, 1e-12, max_iter=0)
        assert excinfo.value.best is not None
        assert excinfo.value.best.reduced_residual_norm > 0

    def test_identity_basis_matches_full_newton_on_burgers(self):
        cfg = BurgersConfig(n_cells=9, domain_length=4.5, dt=0.05, n_steps=5)
        problem = BurgersProblem(cfg)
        mu = (2.0, 0.2)
        w_prev = problem.initial_state()
        tree = build_tree(np.eye(9), 3, seed=0)
        basis = RefinedBasis.fresh(np.eye(9), tree)
        sol = solve_rom_step(problem, 1, basis, w_prev, np.zeros(9), w_prev,
                             mu, 1e-11)
        w_full, _ = newton_solve(
            lambda w: problem.residual(1, w, w_prev, mu),
            lambda w: problem.jacobian(1, w, w_prev, mu),
            w_prev, 1e-11, 25)
        assert np.allclose(w_prev + basis.phi @ sol.coords, w_full, atol=1e-9)

    def test_invariant_to_orthonormal_reparameterization(self):
        # replacing phi by phi @ u (u orthogonal) spans the same space, so
        # the reconstructed state must not change
        cfg = BurgersConfig(n_cells=12, domain_length=6.0, dt=0.05, n_steps=5)
        problem = BurgersProblem(cfg)
        mu = (2.0, 0.2)
        w_prev = problem.initial_state()
        rng = np.random.default_rng(52)
        tree = build_tree(rng.standard_normal((12, 6)), 3, seed=0)
        phi = np.linalg.qr(rng.standard_normal((12, 4)))[0]
        u = np.linalg.qr(rng.standard_normal((4, 4)))[0]
        states = []
        for cols in (phi, phi @ u):
            basis = RefinedBasis.fresh(cols, tree)
            sol = solve_rom_step(problem, 1, basis, w_prev, np.zeros(4),
                                 w_prev, mu, 1e-9)
            states.append(w_prev + cols @ sol.coords)
        assert np.allclose(states[0], states[1], atol=1e-8)

    def test_ill_scaled_column_does_not_fake_convergence(self):
        # shrinking a column shrinks its reduced-residual entry by the same
        # factor, so ||phi^T r|| alone would accept a state whose residual
        # still has a large component inside span(phi); the solve must keep
        # iterating until the span itself is converged
        problem, basis, w_ref = spd_basis_setup(9)
        scaled = basis.phi.copy()
        scaled[:, 0] *= 1e-9
        shrunk = RefinedBasis(phi=scaled, node_of=basis.node_of,
                              tree_of=basis.tree_of)
        tol = 1e-8
        sol = solve_rom_step(problem, 0, shrunk, w_ref,
                             np.zeros(basis.n_cols), w_ref, None, tol)
        w = w_ref + scaled @ sol.coords
        r = problem.residual(0, w, w_ref, None)
        q = np.linalg.qr(scaled)[0]
        assert sol.newton_iters > 0
        assert np.linalg.norm(q.T @ r) <= tol
        reference, _ = galerkin_solve(problem.a, problem.b, w_ref, basis.phi)
        assert np.allclose(w, reference, atol=1e-6)

    def test_residual_weighting_map(self):
        # weighting the residual by A makes the reduced system the normal
        # equations, i.e. least squares over the subspace
        rng = np.random.default_rng(51)
        problem = random_spd_problem(rng, 10)
        tree = build_tree(rng.standard_normal((10, 4)), 3, seed=1)
        phi = np.linalg.qr(rng.standard_normal((10, 3)))[0]
        basis = RefinedBasis.fresh(phi, tree)
        w_ref = np.zeros(10)
        sol = solve_rom_step(problem, 0, basis, w_ref, np.zeros(3), w_ref,
                             None, 1e-11, test_map=problem.a)
        want, *_ = np.linalg.lstsq(problem.a @ phi, problem.b, rcond=None)
        assert np.allclose(sol.coords, want, atol=1e-8)
