"""Command-line interface.

Subcommands: train, run-fom, run-rom, compare, sweep. Exit codes: 0 on
success, 2 for configuration problems (bad config file, missing inputs),
3 for solver failures.
"""

import argparse
import csv
import sys
from pathlib import Path

from .adapt import AdaptError
from .config import ConfigError, load_spec
from .experiment import (
    compare,
    load_artifacts,
    run_fom,
    run_rom,
    save_artifacts,
    sweep,
    train,
)
from .fom import NewtonError
from .matio import load_matrix, save_matrix
from .rom import RomNewtonError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _print_report(report, label):
    print(f"{label}:")
    print(f"  relative_error   = {report.relative_error:.6g}")
    print(f"  avg_basis_dim    = {report.avg_basis_dim:.6g}")
    print(f"  avg_refine_calls = {report.avg_refine_calls:.6g}")
    print(f"  online_time_s    = {report.online_time:.3f}")


def _write_report(path, report):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"relative_error = {report.relative_error!r}\n")
        fh.write(f"avg_basis_dim = {report.avg_basis_dim!r}\n")
        fh.write(f"avg_refine_calls = {report.avg_refine_calls!r}\n")
        fh.write(f"online_time_s = {report.online_time!r}\n")


def _write_rows(path, fieldnames, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def cmd_train(spec, csv_out=False):
    artifacts = train(spec)
    save_artifacts(spec.output_dir, artifacts)
    if csv_out:
        save_matrix(spec.output_dir / "snapshots.csv", artifacts.snapshots, csv=True)
    print(f"trained: {artifacts.pod.vectors.shape[1]} basis vectors, "
          f"tree with {artifacts.tree.n_nodes} nodes -> {spec.output_dir}")
    return EXIT_OK


def cmd_run_fom(spec, csv_out=False):
    traj = run_fom(spec)
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(out / "fom_traj.dat", traj, csv=csv_out)
    print(f"full-order trajectory ({traj.shape[0]} dofs x {traj.shape[1]} steps) "
          f"-> {out / 'fom_traj.dat'}")
    return EXIT_OK


def cmd_run(spec, csv_out=False, events=False, indicators=False):
    artifacts = load_artifacts(spec.output_dir)
    fom_path = Path(spec.output_dir) / "fom_traj.dat"
    fom_traj = load_matrix(fom_path) if fom_path.exists() else None
    event_rows = [] if events else None
    indicator_rows = [] if indicators else None
    result = run_rom(spec, artifacts, fom_traj,
                     event_sink=event_rows, indicator_sink=indicator_rows)
    out = Path(spec.output_dir)
    save_matrix(out / "rom_traj.dat", result.states, csv=csv_out)
    _write_report(out / "report.txt", result.report)
    if event_rows is not None:
        _write_rows(out / "events.csv",
                    ["step", "round", "dim_before", "dim_after", "marked",
                     "full_residual", "note"], event_rows)
    if indicator_rows is not None:
        _write_rows(out / "indicators.csv",
                    ["step", "attempt", "fine_index", "parent", "child", "value"],
                    indicator_rows)
    _print_report(result.report, "adaptive run" if spec.adaptive else "plain run")
    if fom_traj is None:
        print(f"  (no full-order reference at {fom_path}; "
              "run `hrom run-fom` to enable relative_error)")
    return EXIT_OK


def cmd_compare(fom_path, rom_path):
    report = compare(load_matrix(fom_path), load_matrix(rom_path))
    print(f"relative_error = {report.relative_error:.6g}")
    return EXIT_OK


def cmd_sweep(spec):
    if not spec.sweep_fom_tols:
        raise ConfigError("sweep requires a [sweep] section with fom_tols")
    artifacts = load_artifacts(spec.output_dir)
    fom_path = Path(spec.output_dir) / "fom_traj.dat"
    if not fom_path.exists():
        raise ConfigError(f"{fom_path}: run-fom must be run before sweep")
    fom_traj = load_matrix(fom_path)
    rows = []
    for tol, report in sweep(spec, artifacts, fom_traj):
        rows.append({"fom_tol": tol,
                     "relative_error": report.relative_error,
                     "avg_basis_dim": report.avg_basis_dim,
                     "avg_refine_calls": report.avg_refine_calls,
                     "online_time_s": report.online_time})
        _print_report(report, f"fom_tol = {tol:g}")
    _write_rows(Path(spec.output_dir) / "sweep.csv",
                ["fom_tol", "relative_error", "avg_basis_dim",
                 "avg_refine_calls", "online_time_s"], rows)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hrom",
        description="Adaptive basis refinement for reduced-order models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="experiment config file")
        return p

    p = with_config(sub.add_parser("train", help="build snapshots, basis, tree"))
    p.add_argument("--csv", action="store_true", help="also dump snapshots as CSV")
    p = with_config(sub.add_parser("run-fom", help="store the full-order trajectory"))
    p.add_argument("--csv", action="store_true", help="write the trajectory as CSV")
    p = with_config(sub.add_parser("run-rom", help="run the reduced model"))
    p.add_argument("--csv", action="store_true", help="write the trajectory as CSV")
    p.add_argument("--events", action="store_true",
                   help="log per-refinement events to events.csv")
    p.add_argument("--indicators", action="store_true",
                   help="log raw error indicators to indicators.csv")
    p = sub.add_parser("compare", help="relative error between two trajectories")
    p.add_argument("fom_traj")
    p.add_argument("rom_traj")
    with_config(sub.add_parser("sweep", help="adaptive runs over a tolerance list"))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            return cmd_compare(args.fom_traj, args.rom_traj)
        spec = load_spec(args.config)
        if args.command == "train":
            return cmd_train(spec, csv_out=args.csv)
        if args.command == "run-fom":
            return cmd_run_fom(spec, csv_out=args.csv)
        if args.command == "run-rom":
            return cmd_run(spec, csv_out=args.csv, events=args.events,
                           indicators=args.indicators)
        return cmd_sweep(spec)
    except (ConfigError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NewtonError, RomNewtonError, AdaptError) as err:
        step = getattr(err, "step", None)
        where = f" at step {step}" if step is not None else ""
        print(f"solver failure{where}: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
