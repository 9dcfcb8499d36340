"""Refined bases and the splitting mechanism.

A refined basis is a matrix of column vectors where each column is assigned
a node of a splitting tree; the column may only be nonzero on that node's
element set. Splitting a column copies it onto each child of its node,
masked to the child's elements. Because children partition the parent's
elements, the children columns sum back to the parent exactly, which makes
the coarse-from-fine prolongation operator exact and the refined spaces
nested.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RefinedBasis:
    """Basis matrix plus per-column tree assignment.

    tree_of usually holds p aliases of one shared tree; the child-grouping
    refinement gives columns privately edited copies.
    """

    phi: np.ndarray
    node_of: tuple
    tree_of: tuple

    @classmethod
    def fresh(cls, phi, tree):
        """A new basis: every column sits at the root (full support)."""
        phi = np.asarray(phi, dtype=float)
        p = phi.shape[1]
        return cls(phi=phi, node_of=(1,) * p, tree_of=(tree,) * p)

    @property
    def n_cols(self):
        return self.phi.shape[1]

    @property
    def n_dofs(self):
        return self.phi.shape[0]


@dataclass(frozen=True)
class ChildIndexMap:
    """Maps (coarse column i, child j) to a flat fine-column index.

    Fine index of (i, j) is offsets[i] + j; leaves contribute no fine
    columns.
    """

    n_children: tuple

    @property
    def offsets(self):
        return np.concatenate(([0], np.cumsum(self.n_children))).astype(int)

    @property
    def n_fine(self):
        return int(sum(self.n_children))

    def forward(self, i, j):
        if not 0 <= j < self.n_children[i]:
            raise IndexError(f"column {i} has no child {j}")
        return int(self.offsets[i]) + j

    def inverse(self, fine_index):
        off = self.offsets
        i = int(np.searchsorted(off, fine_index, side="right")) - 1
        return i, int(fine_index - off[i])


@dataclass(frozen=True)
class Prolongation:
    """Fine-from-coarse coordinate map: row k of the induced 0/1 matrix has
    its single 1 in column parent_of[k]."""

    parent_of: np.ndarray
    n_coarse: int

    @property
    def n_fine(self):
        return len(self.parent_of)

    def matrix(self):
        p_mat = np.zeros((self.n_fine, self.n_coarse))
        p_mat[np.arange(self.n_fine), self.parent_of] = 1.0
        return p_mat


def fine_basis(b):
    """Split every splittable column into its children.

    Returns (phi_fine, child index map, prolongation). Columns at leaf
    nodes contribute nothing; a basis of only leaves yields an empty fine
    basis, which callers treat as "cannot refine further". Masked columns
    that come out identically zero are kept (the rank repair in the adapt
    module removes them).
    """
    n, p = b.phi.shape
    cols = []
    parent_of = []
    n_children = []
    for i in range(p):
        tr = b.tree_of[i]
        kids = tr.children.get(b.node_of[i], ())
        n_children.append(len(kids))
        for c in kids:
            col = np.zeros(n)
            idx = list(tr.elements[c])
            col[idx] = b.phi[idx, i]
            cols.append(col)
            parent_of.append(i)
    phi_fine = np.column_stack(cols) if cols else np.zeros((n, 0))
    cmap = ChildIndexMap(n_children=tuple(n_children))
    p_op = Prolongation(parent_of=np.asarray(parent_of, dtype=int), n_coarse=p)
    return phi_fine, cmap, p_op


def prolong(coords, p_op):
    """Fine coordinates representing the same state: each child inherits
    its parent's coordinate."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (p_op.n_coarse,):
        raise ValueError("coarse coordinate length mismatch")
    return coords[p_op.parent_of]


def restrict(coords_fine, p_op):
    """Least-squares inverse of prolong: each parent gets the mean of its
    children's coordinates (pseudoinverse of a 0/1 selection column).

    Parents without fine columns (leaves) restrict to 0, the minimum-norm
    choice.
    """
    coords_fine = np.asarray(coords_fine, dtype=float)
    if coords_fine.shape != (p_op.n_fine,):
        raise ValueError("fine coordinate length mismatch")
    out = np.zeros(p_op.n_coarse)
    np.add.at(out, p_op.parent_of, coords_fine)
    counts = np.bincount(p_op.parent_of, minlength=p_op.n_coarse)
    nz = counts > 0
    out[nz] /= counts[nz]
    return out


def is_fully_split(b):
    """True when every column sits at a leaf and every dof is represented
    by some column that is a nonzero multiple of its unit vector."""
    for i in range(b.n_cols):
        if not b.tree_of[i].is_leaf(b.node_of[i]):
            return False
    covered = set()
    for i in range(b.n_cols):
        nz = np.flatnonzero(b.phi[:, i])
        if len(nz) == 1:
            covered.add(int(nz[0]))
    return len(covered) == b.n_dofs


def support_ok(b, tol=0.0):
    """Check the support invariant: columns vanish outside their node's
    element set."""
    for i in range(b.n_cols):
        allowed = np.zeros(b.n_dofs, dtype=bool)
        allowed[list(b.tree_of[i].elements[b.node_of[i]])] = True
        if np.any(np.abs(b.phi[~allowed, i]) > tol):
            return False
    return True
