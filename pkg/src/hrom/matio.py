"""Matrix and basis file IO.

The native matrix format is a one-line ASCII header `rows cols` followed by
the values as little-endian 64-bit floats in column-major order. A CSV
variant exists for eyeballing; the loader tells them apart by the header.
A basis is a matrix file plus a `<path>.nodes` sidecar holding the tree
node id of each column.
"""

import numpy as np


def save_matrix(path, a, csv=False):
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(a, dtype=float)))
    if csv:
        np.savetxt(path, a, delimiter=",", fmt="%.17g")
        return
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(f"{rows} {cols}\n".encode("ascii"))
        fh.write(a.astype("<f8").tobytes(order="F"))


def load_matrix(path):
    with open(path, "rb") as fh:
        header = fh.readline()
        rest = fh.read()
    parts = header.split()
    if len(parts) == 2:
        try:
            rows, cols = int(parts[0]), int(parts[1])
        except ValueError:
            rows = -1
        if rows >= 0 and len(rest) == 8 * rows * cols:
            flat = np.frombuffer(rest, dtype="<f8")
            return flat.reshape((rows, cols), order="F").copy()
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))


def save_basis(path, phi, nodes, csv=False):
    if phi.shape[1] != len(nodes):
        raise ValueError("one node id per basis column required")
    save_matrix(path, phi, csv=csv)
    with open(f"{path}.nodes", "w", encoding="ascii") as fh:
        fh.write("nodes: " + " ".join(str(int(n)) for n in nodes) + "\n")


def load_basis(path):
    phi = load_matrix(path)
    with open(f"{path}.nodes", encoding="ascii") as fh:
        line = fh.readline().strip()
    if not line.startswith("nodes:"):
        raise ValueError(f"{path}.nodes: expected a 'nodes:' line, got {line!r}")
    nodes = tuple(int(tok) for tok in line[len("nodes:"):].split())
    if phi.shape[1] != len(nodes):
        raise ValueError(
            f"{path}: {phi.shape[1]} columns but {len(nodes)} node ids")
    return phi, nodes
