"""Online adaptive refinement.

Per time step: solve the reduced step system, and while the full residual
norm stays above the target tolerance, mark the basis vectors carrying an
above-average share of the error indicators, split them (either into all
children, or into error-balanced child groups with per-vector tree edits),
repair the rank with a pivoted QR, warm-start from the mapped coordinates
and re-solve. A periodic reset restores the initial basis so online growth
stays bounded.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .dwr import AdjointSingularError, compute_indicators
from .linalg import pseudoinverse_apply, qr_column_pivot
from .rom import solve_rom_step
from .splitting import RefinedBasis, fine_basis, is_fully_split
from .tree import narrow_node


class AdaptError(RuntimeError):
    """Refinement could not reduce the full residual below tolerance."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class AdaptConfig:
    rom_tol: float = 5e-3
    fom_tol: float = 0.05
    reset_freq: int = 50          # 0 disables the periodic basis reset
    k_means: int = 10             # offline tree construction parameter
    partition_fraction: float = 0.5
    rank_tol: float = 1e-10
    max_refine_rounds: int = 50
    refine_variant: str = "child_grouping"

    def __post_init__(self):
        if self.rom_tol <= 0 or self.fom_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.partition_fraction <= 1.0:
            raise ValueError("partition_fraction must lie in (0, 1]")
        if self.refine_variant not in ("plain", "child_grouping"):
            raise ValueError(f"unknown refine_variant {self.refine_variant!r}")


@dataclass
class AdaptStats:
    """Online cost accounting: averages are exact running sums over counts."""

    dim_iter_sum: float = 0.0
    newton_iters: int = 0
    refine_calls: int = 0
    steps: int = 0
    wall_time: float = 0.0

    def record_solve(self, dim, iters):
        self.dim_iter_sum += dim * iters
        self.newton_iters += iters

    def avg_basis_dim(self):
        return self.dim_iter_sum / self.newton_iters if self.newton_iters else float("nan")

    def avg_refine_calls(self):
        return self.refine_calls / self.steps if self.steps else float("nan")


@dataclass(frozen=True)
class RefineInfo:
    changed: bool
    marked: tuple
    source: np.ndarray  # pre-refine column index feeding each output column
    dropped: int = 0    # columns removed by rank repair (prolongation inexact)


@dataclass(frozen=True)
class AdaptStepResult:
    basis: RefinedBasis       # basis to carry into the next step (post-reset)
    solution: object          # RomStepSolution in the converged basis
    state: np.ndarray         # reconstructed full state at this step
    coords_next: np.ndarray   # warm-start coords for the next step
    refine_rounds: int
    reset: bool


def mark_vectors(indicators, p, fallback_scores=None):
    """Columns whose children carry an at-least-average share of the total
    indicator sum (ties included).

    With all indicators zero the rule would mark nothing and the caller's
    loop would spin, so the fallback marks the single splittable column
    maximizing |phi_i^T rbar| (`fallback_scores`); leaf columns cannot be
    split and are never fallback candidates.
    """
    sums = indicators.parent_sums()
    total = sums.sum()
    if total > 0.0:
        return {i for i in range(p) if sums[i] >= total / p}
    if fallback_scores is None:
        return set()
    splittable = [i for i in range(p) if indicators.cmap.n_children[i] > 0]
    if not splittable:
        return set()
    return {max(splittable, key=lambda i: fallback_scores[i])}


def _rank_repair(phi_cols, nodes, trees, source, rank_tol):
    """Pivoted QR rank repair: keep the first `rank` pivot columns, carrying
    node assignments, tree handles and warm-start sources along."""
    phi = np.column_stack(phi_cols)
    fac = qr_column_pivot(phi, rank_tol)
    keep = fac.permutation[:fac.numerical_rank]
    basis = RefinedBasis(
        phi=phi[:, keep],
        node_of=tuple(nodes[k] for k in keep),
        tree_of=tuple(trees[k] for k in keep),
    )
    dropped = phi.shape[1] - fac.numerical_rank
    return basis, np.asarray([source[k] for k in keep], dtype=int), dropped


def refine_plain(basis, indicators, fine, p_op, rank_tol=1e-10, fallback_scores=None):
    """Replace every marked vector by all of its children (first child in
    place, the rest appended), then rank-repair."""
    p = basis.n_cols
    marked = mark_vectors(indicators, p, fallback_scores)
    offsets = indicators.cmap.offsets
    phi_cols = [basis.phi[:, j] for j in range(p)]
    nodes = list(basis.node_of)
    trees = list(basis.tree_of)
    source = list(range(p))
    changed = False
    for i in sorted(marked):
        kids = trees[i].children.get(nodes[i], ())
        if not kids:
            continue
        changed = True
        off = offsets[i]
        phi_cols[i] = fine[:, off]
        nodes[i] = kids[0]
        for j in range(1, len(kids)):
            phi_cols.append(fine[:, off + j])
            nodes.append(kids[j])
            trees.append(trees[i])
            source.append(i)
    if not changed:
        return basis, RefineInfo(changed=False, marked=tuple(sorted(marked)),
                                 source=np.arange(p))
    new_basis, src, dropped = _rank_repair(phi_cols, nodes, trees, source, rank_tol)
    return new_basis, RefineInfo(changed=True, marked=tuple(sorted(marked)),
                                 source=src, dropped=dropped)


def _greedy_groups(errs, fraction):
    """Partition child positions into minimum-cardinality groups whose error
    sum clears fraction * total; a remainder that cannot clear the bar
    becomes the final group."""
    total = float(errs.sum())
    target = fraction * total
    remaining = list(range(len(errs)))
    groups = []
    while remaining:
        order = sorted(remaining, key=lambda j: (-errs[j], j))
        acc = 0.0
        grp = []
        for j in order:
            grp.append(j)
            acc += errs[j]
            if acc >= target:
                break
        groups.append(sorted(grp))
        remaining = [j for j in remaining if j not in grp]
    return groups


def refine_child_grouping(basis, indicators, fine, p_op, partition_fraction,
                          rank_tol=1e-10, fallback_scores=None):
    """Split marked vectors into error-balanced child groups.

    A singleton group descends to that child's node; a larger group keeps
    the parent's node id but narrows a private copy of the vector's tree to
    the group (children = the group's nodes, elements = their union), and
    its column is the sum of the group's fine columns. A first group that
    swallows every child reproduces the parent and is skipped as a no-op.
    """
    p = basis.n_cols
    marked = mark_vectors(indicators, p, fallback_scores)
    offsets = indicators.cmap.offsets
    phi_cols = [basis.phi[:, j] for j in range(p)]
    nodes = list(basis.node_of)
    trees = list(basis.tree_of)
    source = list(range(p))
    changed = False
    for i in sorted(marked):
        tr = trees[i]
        node = nodes[i]
        kids = tr.children.get(node, ())
        if not kids:
            continue
        groups = _greedy_groups(indicators.by_parent(i), partition_fraction)
        if len(groups) == 1:
            continue  # degenerate: one group of all children reproduces the parent
        off = offsets[i]
        pieces = []
        for grp in groups:
            col = fine[:, [off + j for j in grp]].sum(axis=1)
            if len(grp) == 1:
                pieces.append((col, kids[grp[0]], tr))
            else:
                pieces.append((col, node, narrow_node(tr, node, [kids[j] for j in grp])))
        changed = True
        phi_cols[i], nodes[i], trees[i] = pieces[0]
        for col, gnode, gtree in pieces[1:]:
            phi_cols.append(col)
            nodes.append(gnode)
            trees.append(gtree)
            source.append(i)
    if not changed:
        return basis, RefineInfo(changed=False, marked=tuple(sorted(marked)),
                                 source=np.arange(p))
    new_basis, src, dropped = _rank_repair(phi_cols, nodes, trees, source, rank_tol)
    return new_basis, RefineInfo(changed=True, marked=tuple(sorted(marked)),
                                 source=src, dropped=dropped)


def adapt_step(fom, n, basis, w_ref, coords_init, w_prev, mu, cfg, stats,
               initial_basis, test_map=None, event_sink=None, indicator_sink=None):
    """One adaptively refined time step.

    Solves to the reduced tolerance, refines while the full residual norm
    exceeds cfg.fom_tol, and applies the periodic basis reset afterwards.
    A fully split basis makes the reduced solve equivalent to the
    full-order solve, so at that point the step is re-solved against the
    full residual norm directly. Exceeding cfg.max_refine_rounds raises
    AdaptError.
    """
    t0 = time.perf_counter()
    coords = np.asarray(coords_init, dtype=float)
    rounds = 0
    sol = None
    while True:
        sol = solve_rom_step(fom, n, basis, w_ref, coords, w_prev, mu,
                             cfg.rom_tol, test_map=test_map)
        stats.record_solve(basis.n_cols, sol.newton_iters)
        coords = sol.coords
        if sol.full_residual_norm <= cfg.fom_tol:
            break
        if rounds >= cfg.max_refine_rounds:
            raise AdaptError(
                f"residual {sol.full_residual_norm:.3e} still above "
                f"{cfg.fom_tol:.1e} after {rounds} refine rounds "
                f"(basis dim {basis.n_cols})", step=n)
        rounds += 1
        stats.refine_calls += 1
        dim_before = basis.n_cols
        try:
            indicators, fine, p_op = compute_indicators(
                fom, n, basis, w_ref, coords, w_prev, mu, test_map)
        except AdjointSingularError:
            if event_sink is not None:
                event_sink.append({"step": n, "round": rounds,
                                   "dim_before": dim_before, "dim_after": dim_before,
                                   "marked": 0, "full_residual": sol.full_residual_norm,
                                   "note": "adjoint singular, refinement skipped"})
            continue
        if p_op.n_fine == 0:
            if is_fully_split(basis):
                sol = solve_rom_step(fom, n, basis, w_ref, coords, w_prev, mu,
                                     cfg.rom_tol, test_map=test_map,
                                     full_tol=cfg.fom_tol)
                stats.record_solve(basis.n_cols, sol.newton_iters)
                coords = sol.coords
                break
            raise AdaptError(
                "basis cannot be refined further (all columns at leaves) but "
                f"residual {sol.full_residual_norm:.3e} exceeds {cfg.fom_tol:.1e}",
                step=n)
        if indicator_sink is not None:
            for k, val in enumerate(indicators.flat):
                parent, child = indicators.cmap.inverse(k)
                indicator_sink.append({"step": n, "attempt": rounds, "fine_index": k,
                                       "parent": parent, "child": child,
                                       "value": float(val)})
        w = w_ref + basis.phi @ coords
        r = fom.residual(n, w, w_prev, mu)
        rbar = r if test_map is None else test_map.T @ r
        scores = np.abs(basis.phi.T @ rbar)
        if cfg.refine_variant == "plain":
            new_basis, info = refine_plain(basis, indicators, fine, p_op,
                                           cfg.rank_tol, fallback_scores=scores)
        else:
            new_basis, info = refine_child_grouping(basis, indicators, fine, p_op,
                                                    cfg.partition_fraction,
                                                    cfg.rank_tol,
                                                    fallback_scores=scores)
        if event_sink is not None:
            event_sink.append({"step": n, "round": rounds,
                               "dim_before": dim_before, "dim_after": new_basis.n_cols,
                               "marked": len(info.marked),
                               "full_residual": sol.full_residual_norm, "note": ""})
        if info.changed:
            if info.dropped:
                # Rank repair removed columns, so prolonged coords no longer
                # reconstruct the solved state; re-project it instead.
                coords = pseudoinverse_apply(new_basis.phi, w - w_ref)
            else:
                # Children inherit the coordinate of the vector they replace.
                coords = coords[info.source]
            basis = new_basis
        # an unchanged basis re-enters the loop and runs down the round cap

    state = w_ref + basis.phi @ coords
    reset = bool(cfg.reset_freq) and n % cfg.reset_freq == 0
    if reset:
        basis_out = initial_basis
        coords_next = initial_basis.phi.T @ (state - w_ref)
    else:
        basis_out = basis
        coords_next = coords
    stats.steps += 1
    stats.wall_time += time.perf_counter() - t0
    return AdaptStepResult(basis=basis_out, solution=sol, state=state,
                           coords_next=coords_next, refine_rounds=rounds,
                           reset=reset)
