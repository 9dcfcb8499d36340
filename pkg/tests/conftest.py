"""Shared fixtures and independent oracles.

Expected values here are computed with plain numpy, independently of the
library code under test, so a bug in the package cannot hide inside its own
reference results.
"""

import numpy as np
import pytest

from hrom.fom import LinearProblem
from hrom.splitting import RefinedBasis, fine_basis
from hrom.tree import build_tree

# A six-dof, eight-snapshot matrix with three perfectly correlated dof
# groups plus small noise. Rows {0}, {2, 5} and {1, 3, 4} each follow one
# latent time signal, so clustering the processed rows must recover exactly
# those groups.
TIME_FACTORS = np.array([
    [-2.2083, -5.1072, 2.6816, 9.3277, -6.4506, -3.2548, 4.2237, -3.2557],
    [-2.9810, 0.6557, 3.0474, 5.5252, 2.7674, 2.3311, 9.6190, -6.6484],
    [-2.4547, 5.2676, -3.6434, 5.5661, -7.5449, 9.3079, -2.0459, -0.0728],
]).T

SPACE_FACTORS = np.array([
    [-3.9885, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 8.6843, 0.0, 0.0, -1.6393],
    [0.0, -1.7288, 0.0, 6.0559, 2.2407, 0.0],
]).T

CORRELATED_GROUPS = [(0,), (2, 5), (1, 3, 4)]
MISMATCHED_GROUPS = [(0,), (2, 4), (1, 3, 5)]

NOISE_SEED = 0


def make_correlated_snapshots(seed=NOISE_SEED):
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=(6, 8))
    return SPACE_FACTORS @ TIME_FACTORS.T + 0.1 * noise


def random_snapshot_matrix(rng, max_dofs=64):
    """Assorted shapes and structures: dense noise, low rank, duplicated
    and zero rows, the kinds of inputs the offline stage actually sees."""
    n = int(rng.integers(1, max_dofs + 1))
    m = int(rng.integers(1, 13))
    kind = rng.integers(4)
    if kind == 0:
        w = rng.standard_normal((n, m))
    elif kind == 1:
        r = int(rng.integers(1, min(n, m) + 1))
        w = rng.standard_normal((n, r)) @ rng.standard_normal((r, m))
    elif kind == 2:
        w = rng.standard_normal((n, m))
        w[rng.integers(n)] = w[rng.integers(n)]  # duplicate a row
    else:
        w = rng.standard_normal((n, m))
        w[rng.integers(n)] = 0.0
    return w


@pytest.fixture
def correlated_snapshots():
    return make_correlated_snapshots()


def masked_group_basis(vector, groups):
    """One column per group: the vector restricted to the group's dofs."""
    cols = []
    for grp in groups:
        col = np.zeros(len(vector))
        col[list(grp)] = vector[list(grp)]
        cols.append(col)
    return np.stack(cols, axis=1)


def projection_error(w, phi):
    coef, *_ = np.linalg.lstsq(phi, w, rcond=None)
    return np.linalg.norm(w - phi @ coef) / np.linalg.norm(w)


def random_spd_problem(rng, n, linear_output=False):
    m = rng.standard_normal((n, n))
    a = m.T @ m + n * np.eye(n)
    b = rng.standard_normal(n)
    c = rng.standard_normal(n) if linear_output else None
    return LinearProblem(a, b, output_vector=c)


def random_tree(rng, n_dofs, n_snaps=6, k=3):
    w = rng.standard_normal((n_dofs, n_snaps))
    return build_tree(w, k, seed=int(rng.integers(10_000)))


def internal_nodes(tree):
    return [node for node in tree.elements if tree.children.get(node)]


def random_internal_basis(rng, tree, n_dofs, p):
    """Basis whose columns sit at internal tree nodes (all splittable),
    each column supported on its node's elements."""
    candidates = internal_nodes(tree)
    nodes = [candidates[rng.integers(len(candidates))] for _ in range(p)]
    phi = np.zeros((n_dofs, p))
    for j, node in enumerate(nodes):
        idx = list(tree.elements[node])
        phi[idx, j] = rng.standard_normal(len(idx))
    return RefinedBasis(phi=phi, node_of=tuple(nodes), tree_of=(tree,) * p)


def galerkin_solve(a, b, w_ref, phi):
    """Direct reduced Galerkin solution of A w = b over w_ref + range(phi)."""
    coords = np.linalg.solve(phi.T @ a @ phi, phi.T @ (b - a @ w_ref))
    return w_ref + phi @ coords, coords


def fine_adjoint_estimate(fom, n, basis, w_ref, coords, w_prev, mu):
    """Signed output-error estimate using the exact fine-space adjoint.

    Returns (estimate, fine_output - coarse_output), both assembled with
    raw numpy from the problem's residual, Jacobian and output."""
    phi_f, _, _ = fine_basis(basis)
    w_c = w_ref + basis.phi @ coords
    r_c = fom.residual(n, w_c, w_prev, mu)
    jac = fom.jacobian(n, w_c, w_prev, mu)
    grad = fom.output_gradient(n, w_c, w_prev, mu)
    # The fine basis may have dependent columns (splitting does not
    # orthogonalize), so solve both reduced systems in the least-squares
    # sense; the estimate and the fine state are invariant to the null
    # space component.
    y_f, *_ = np.linalg.lstsq(phi_f.T @ jac.T @ phi_f, phi_f.T @ grad, rcond=None)
    estimate = -y_f @ (phi_f.T @ r_c)

    # fine Galerkin root: phi_f^T r(w_c + phi_f d) = 0 for a linear residual
    d, *_ = np.linalg.lstsq(phi_f.T @ (-jac) @ phi_f, phi_f.T @ r_c, rcond=None)
    w_f = w_c + phi_f @ d
    true_diff = fom.output(n, w_f, w_prev, mu) - fom.output(n, w_c, w_prev, mu)
    return estimate, true_diff


def fd_gradient(fn, w, eps=1e-6):
    """Central-difference gradient of a scalar function of the state."""
    grad = np.zeros_like(w)
    for i in range(len(w)):
        up = w.copy()
        dn = w.copy()
        up[i] += eps
        dn[i] -= eps
        grad[i] = (fn(up) - fn(dn)) / (2 * eps)
    return grad


def fd_jacobian(fn, w, eps=1e-6):
    """Central-difference Jacobian of a vector function of the state."""
    cols = []
    for i in range(len(w)):
        up = w.copy()
        dn = w.copy()
        up[i] += eps
        dn[i] -= eps
        cols.append((fn(up) - fn(dn)) / (2 * eps))
    return np.stack(cols, axis=1)
