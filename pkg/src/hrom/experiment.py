"""Experiment drivers: offline training, online reduced runs, metrics.

The offline stage runs the full-order model at each training input, pools
the reference-subtracted snapshots, and builds the POD basis plus the split
tree. The online stage marches the reduced model (adaptively or not) at the
online input and scores it against a stored full-order trajectory.
"""

import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adapt import AdaptStats, adapt_step
from .fom import BurgersProblem, solve_fom
from .matio import load_basis, load_matrix, save_basis, save_matrix
from .rom import PodBasis, build_pod, snapshot_rank, solve_rom_step
from .splitting import RefinedBasis
from .tree import build_tree, load_tree, save_tree


@dataclass(frozen=True)
class MetricsReport:
    relative_error: float
    avg_basis_dim: float
    avg_refine_calls: float
    online_time: float


@dataclass(frozen=True)
class TrainArtifacts:
    snapshots: np.ndarray  # reference-subtracted, one column per stored step
    pod: PodBasis
    tree: object


@dataclass(frozen=True)
class RomRunResult:
    states: np.ndarray
    report: MetricsReport
    stats: AdaptStats


def relative_error(fom_traj, rom_traj):
    """Mean over steps of ||fom_n - rom_n|| / ||fom_n||."""
    fom_traj = np.asarray(fom_traj, dtype=float)
    rom_traj = np.asarray(rom_traj, dtype=float)
    if fom_traj.shape != rom_traj.shape:
        raise ValueError(
            f"trajectory shapes differ: {fom_traj.shape} vs {rom_traj.shape}")
    num = np.linalg.norm(fom_traj - rom_traj, axis=0)
    den = np.linalg.norm(fom_traj, axis=0)
    return float(np.mean(num / den))


def compare(fom_traj, rom_traj):
    return MetricsReport(relative_error=relative_error(fom_traj, rom_traj),
                         avg_basis_dim=float("nan"),
                         avg_refine_calls=float("nan"),
                         online_time=0.0)


def shock_front_cell(state, window=5):
    """Grid index of the steepest sustained drop in a state vector.

    Maximizes u[i] - u[i+window] and reports the window midpoint. Single-cell
    differences are unreliable here: the moving front smears over a few cells,
    and reduced-basis states carry short up-down wiggles whose one-cell drop
    can exceed the front's. Netting the drop over a short window reads
    through both.
    """
    u = np.asarray(state, dtype=float)
    if u.ndim != 1 or u.size <= window:
        raise ValueError("state must be a vector longer than the window")
    drops = u[:-window] - u[window:]
    return int(np.argmax(drops)) + window // 2


def train(spec):
    problem = BurgersProblem(spec.burgers)
    w_ref = problem.initial_state()
    blocks = [solve_fom(spec.burgers, mu, n_steps=spec.training_steps)
              for mu in spec.training_inputs]
    pooled = np.hstack(blocks)
    p0 = spec.p0 if spec.p0 is not None else snapshot_rank(pooled, w_ref)
    pod = build_pod(pooled, p0, w_ref)
    centered = pooled - w_ref[:, None]
    tree = build_tree(centered, spec.adapt.k_means, spec.seed)
    return TrainArtifacts(snapshots=centered, pod=pod, tree=tree)


def save_artifacts(out_dir, artifacts):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(out / "snapshots.dat", artifacts.snapshots)
    save_matrix(out / "w_ref.dat", artifacts.pod.reference_state[:, None])
    save_matrix(out / "singvals.dat", artifacts.pod.singular_values[:, None])
    save_basis(out / "basis.dat", artifacts.pod.vectors,
               [1] * artifacts.pod.vectors.shape[1])
    save_tree(out / "tree.txt", artifacts.tree)


def load_artifacts(out_dir):
    out = Path(out_dir)
    snapshots = load_matrix(out / "snapshots.dat")
    w_ref = load_matrix(out / "w_ref.dat")[:, 0]
    singvals = load_matrix(out / "singvals.dat")[:, 0]
    phi, _ = load_basis(out / "basis.dat")
    tree = load_tree(out / "tree.txt", snapshots.shape[0])
    pod = PodBasis(reference_state=w_ref, vectors=phi, singular_values=singvals)
    return TrainArtifacts(snapshots=snapshots, pod=pod, tree=tree)


def run_fom(spec):
    return solve_fom(spec.burgers, spec.online_mu)


def run_rom(spec, artifacts, fom_traj=None, event_sink=None, indicator_sink=None):
    problem = BurgersProblem(spec.burgers)
    w_ref = artifacts.pod.reference_state
    mu = spec.online_mu
    basis0 = RefinedBasis.fresh(artifacts.pod.vectors, artifacts.tree)
    basis = basis0
    coords = np.zeros(basis.n_cols)
    w_prev = w_ref.copy()
    n_steps = spec.burgers.n_steps
    states = np.empty((problem.n_dofs, n_steps))
    stats = AdaptStats()
    t0 = time.perf_counter()
    for n in range(1, n_steps + 1):
        if spec.adaptive:
            res = adapt_step(problem, n, basis, w_ref, coords, w_prev, mu,
                             spec.adapt, stats, basis0,
                             event_sink=event_sink,
                             indicator_sink=indicator_sink)
            basis, coords = res.basis, res.coords_next
            states[:, n - 1] = res.state
        else:
            sol = solve_rom_step(problem, n, basis, w_ref, coords, w_prev, mu,
                                 spec.adapt.rom_tol)
            stats.record_solve(basis.n_cols, sol.newton_iters)
            stats.steps += 1
            coords = sol.coords
            states[:, n - 1] = w_ref + basis.phi @ coords
        w_prev = states[:, n - 1]
    elapsed = time.perf_counter() - t0
    err = relative_error(fom_traj, states) if fom_traj is not None else float("nan")
    report = MetricsReport(relative_error=err,
                           avg_basis_dim=stats.avg_basis_dim(),
                           avg_refine_calls=stats.avg_refine_calls(),
                           online_time=elapsed)
    return RomRunResult(states=states, report=report, stats=stats)


def sweep(spec, artifacts, fom_traj):
    """One adaptive run per sweep tolerance; returns [(tol, MetricsReport)]."""
    results = []
    for tol in spec.sweep_fom_tols:
        case = dataclasses.replace(
            spec, adaptive=True,
            adapt=dataclasses.replace(spec.adapt, fom_tol=tol))
        results.append((tol, run_rom(case, artifacts, fom_traj).report))
    return results
