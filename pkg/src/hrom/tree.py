"""Splitting tree: which groups of degrees of freedom a basis vector may
split into.

A tree is a pair of maps over integer node ids 1..m (root = 1):
``children[node]`` lists child ids in ascending order and ``elements[node]``
lists the dof indices the node covers (0-based, ascending). A valid tree
satisfies three conditions: the root covers every dof, each node's children
partition its element set, and every dof owns a childless singleton node.

Trees are built offline by recursive k-means clustering of snapshot rows:
dofs whose (normalized, sign-flipped) time histories cluster together stay
together near the top of the tree and separate further down.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import kmeans


@dataclass(frozen=True)
class SplitTree:
    """Immutable-by-convention tree; do not mutate the dicts in place."""

    children: dict = field(repr=False)
    elements: dict = field(repr=False)

    @property
    def n_nodes(self):
        return len(self.elements)

    def is_leaf(self, node):
        return len(self.children.get(node, ())) == 0

    def parent_map(self):
        """node -> parent id, root mapped to 0."""
        parents = {1: 0}
        for node, kids in self.children.items():
            for c in kids:
                parents[c] = node
        return parents


@dataclass(frozen=True)
class Violation:
    condition: int  # 1..3; 0 for structural problems
    node: object    # offending node id, dof index for condition 3, or None
    message: str


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    violations: tuple


def validate(tree, n_dofs):
    """Check the three tree conditions plus basic structural sanity."""
    bad = []
    ids = set(tree.elements)
    m = tree.n_nodes
    if ids != set(range(1, m + 1)):
        bad.append(Violation(0, None, "node ids are not 1..m"))
    seen_as_child = {}
    for node, kids in tree.children.items():
        for c in kids:
            if c not in ids:
                bad.append(Violation(0, node, f"child {c} does not exist"))
            if c in seen_as_child:
                bad.append(Violation(0, c, "node has two parents"))
            seen_as_child[c] = node
    for node in ids - set(seen_as_child) - {1}:
        bad.append(Violation(0, node, "non-root node has no parent"))
    for node, elems in tree.elements.items():
        arr = list(elems)
        if arr != sorted(set(arr)) or (arr and not (0 <= arr[0] and arr[-1] < n_dofs)):
            bad.append(Violation(0, node, "element list not ascending unique in range"))
        if not arr:
            bad.append(Violation(0, node, "empty element set"))

    if tuple(tree.elements.get(1, ())) != tuple(range(n_dofs)):
        bad.append(Violation(1, 1, "root does not cover all dofs"))

    for node, kids in tree.children.items():
        if not kids:
            continue
        union = []
        for c in kids:
            union.extend(tree.elements.get(c, ()))
        if len(union) != len(set(union)):
            bad.append(Violation(2, node, "children element sets overlap"))
        if set(union) != set(tree.elements.get(node, ())):
            bad.append(Violation(2, node, "children union differs from parent"))

    singleton_leaves = {
        elems[0]
        for node, elems in tree.elements.items()
        if len(elems) == 1 and tree.is_leaf(node)
    }
    for dof in range(n_dofs):
        if dof not in singleton_leaves:
            bad.append(Violation(3, dof, f"dof {dof} has no childless singleton node"))

    return ValidityReport(ok=not bad, violations=tuple(bad))


def preprocess_snapshots(w):
    """Normalize each snapshot row to unit norm and flip sign so the first
    entry is nonnegative; zero rows stay zero.

    After this, perfectly correlated and anti-correlated dofs have identical
    rows, which is what the clustering should group.
    """
    w = np.asarray(w, dtype=float)
    out = np.zeros_like(w)
    for i, row in enumerate(w):
        nrm = np.linalg.norm(row)
        if nrm == 0.0:
            continue
        r = row / nrm
        if r[0] < 0:
            r = -r
        out[i] = r
    return out


def build_tree(w, k, seed):
    """Recursive k-means tree construction over snapshot rows.

    Nodes are processed breadth-wise in ascending id order. Each node's rows
    are clustered into at most k children; a single-cluster outcome falls
    back to making every element its own leaf child (a node must never have
    exactly one child). Nodes covering a single dof are leaves by definition.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    n_dofs = w.shape[0]
    if k < 2:
        raise ValueError("k must be >= 2")
    if n_dofs < 1:
        raise ValueError("need at least one dof")
    processed = preprocess_snapshots(w)

    children = {1: ()}
    elements = {1: tuple(range(n_dofs))}
    count = 1
    recent = [1]
    while recent:
        current, recent = recent, []
        for node in current:
            elems = elements[node]
            if len(elems) <= 1:
                continue
            assign = kmeans(processed[list(elems)], k, seed)
            if assign.n_nonempty == 1:
                label_sets = [(i,) for i in range(len(elems))]
            else:
                label_sets = assign.label_sets
            kids = []
            for lab in label_sets:
                count += 1
                elements[count] = tuple(elems[i] for i in lab)
                children[count] = ()
                kids.append(count)
                recent.append(count)
            children[node] = tuple(kids)
    return SplitTree(children=children, elements=elements)


def narrow_node(tree, node, kept_children):
    """Copy-on-write edit used by the child-grouping refinement: the node
    keeps its id but now has only `kept_children` and the union of their
    element sets.

    The result is only locally consistent (levels above `node` are not
    updated); the refinement machinery never walks upward, so that is fine.
    Never validate or serialize a narrowed tree.
    """
    kept = tuple(kept_children)
    union = []
    for c in kept:
        union.extend(tree.elements[c])
    children = dict(tree.children)
    elements = dict(tree.elements)
    children[node] = kept
    elements[node] = tuple(sorted(union))
    return SplitTree(children=children, elements=elements)


def save_tree(path, tree):
    """Write one line per node: `node_id parent_id e_1 ... e_k`.

    Node and element indices are 1-based on disk (the root's parent is the
    sentinel 0); in-memory element indices are 0-based.
    """
    parents = tree.parent_map()
    with open(path, "w") as fh:
        for node in range(1, tree.n_nodes + 1):
            elems = " ".join(str(e + 1) for e in tree.elements[node])
            fh.write(f"{node} {parents[node]} {elems}\n")


def load_tree(path, n_dofs):
    """Read a tree file and re-validate it against the dof count."""
    elements = {}
    parents = {}
    with open(path) as fh:
        for line in fh:
            fieldsv = line.split()
            if not fieldsv:
                continue
            node, parent = int(fieldsv[0]), int(fieldsv[1])
            elements[node] = tuple(int(e) - 1 for e in fieldsv[2:])
            parents[node] = parent
    children = {node: [] for node in elements}
    for node, parent in parents.items():
        if parent != 0:
            if parent not in children:
                raise ValueError(f"tree file references missing parent {parent}")
            children[parent].append(node)
    tree = SplitTree(
        children={n: tuple(sorted(c)) for n, c in children.items()},
        elements=elements,
    )
    report = validate(tree, n_dofs)
    if not report.ok:
        raise ValueError(f"invalid tree file: {report.violations[0].message}")
    return tree
