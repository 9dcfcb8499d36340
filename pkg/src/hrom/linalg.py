"""Dense numerical kernels shared by the rest of the library.

Thin SVD, rank-revealing QR, pseudoinverse application and a deterministic
Lloyd k-means. Everything works on plain float64 ndarrays.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg


def _check_finite(a, name="input"):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")
    return a


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD a = left_vectors @ diag(singular_values) @ right_vectors.T."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray


@dataclass(frozen=True)
class PivotedQr:
    """QR with column pivoting, a[:, permutation] = q @ r.

    numerical_rank counts leading diagonal entries of r with
    |r[j, j]| > rank_tol * |r[0, 0]| (zero matrices have rank 0).
    """

    q: np.ndarray
    r: np.ndarray
    permutation: np.ndarray
    numerical_rank: int


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of row indices into nonempty clusters."""

    label_sets: tuple
    n_nonempty: int


def thin_svd(a):
    """Thin SVD with a fixed sign convention.

    Each left singular vector is flipped (together with its right partner)
    so that its largest-magnitude entry is positive, making vector
    comparisons across platforms stable.
    """
    a = _check_finite(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    v = vt.T
    for j in range(u.shape[1]):
        col = u[:, j]
        lead = col[np.argmax(np.abs(col))]
        if lead < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return SvdResult(left_vectors=u, singular_values=s, right_vectors=v)


def qr_column_pivot(a, rank_tol=1e-10):
    """QR factorization with column pivoting and a numerical rank estimate."""
    a = _check_finite(a)
    if not 0.0 < rank_tol < 1.0:
        raise ValueError("rank_tol must lie in (0, 1)")
    if a.size == 0:
        return PivotedQr(q=np.zeros((a.shape[0], 0)), r=np.zeros((0, a.shape[1])),
                         permutation=np.arange(a.shape[1]), numerical_rank=0)
    q, r, perm = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > rank_tol * diag[0]))
    return PivotedQr(q=q, r=r, permutation=perm, numerical_rank=rank)


def pseudoinverse_apply(a, b):
    """Minimum-norm least-squares solution of a x = b."""
    a = _check_finite(a, "matrix")
    b = _check_finite(b, "rhs")
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x


def _seed_centers(points, k, rng):
    """Farthest-point seeding: random first center, then maximal separation."""
    n = points.shape[0]
    centers = [int(rng.integers(n))]
    dist = np.linalg.norm(points - points[centers[0]], axis=1)
    while len(centers) < min(k, n):
        far = int(np.argmax(dist))
        if dist[far] == 0.0:  # every remaining point duplicates a center
            break
        centers.append(far)
        dist = np.minimum(dist, np.linalg.norm(points - points[far], axis=1))
    return points[centers].copy()


def kmeans(points, k, seed):
    """Deterministic Lloyd k-means over the rows of `points`.

    Farthest-point seeding (the seed only picks the first center), ties in
    the assignment go to the lowest center index, empty clusters are
    dropped. Stops after 100 iterations or when centroids move < 1e-12.
    """
    points = _check_finite(np.atleast_2d(points))
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n == 0:
        raise ValueError("need at least one row")
    rng = np.random.default_rng(seed)
    centers = _seed_centers(points, k, rng)
    for _ in range(100):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties
        new_centers = []
        for j in range(centers.shape[0]):
            members = points[labels == j]
            if len(members):
                new_centers.append(members.mean(axis=0))
        new_centers = np.array(new_centers)
        moved = (new_centers.shape != centers.shape
                 or np.linalg.norm(new_centers - centers) >= 1e-12)
        centers = new_centers
        if not moved:
            break
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    sets = [tuple(np.flatnonzero(labels == j)) for j in range(centers.shape[0])]
    sets = [s for s in sets if s]
    sets.sort(key=lambda s: s[0])
    return ClusterAssignment(label_sets=tuple(sets), n_nonempty=len(sets))
