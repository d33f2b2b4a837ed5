"""Command-line entry points: run, sweep, reference, stats."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .harness import (ConfigError, NumericalFailure, _parse_bool, _read_gap_csv,
                      parse_config, restat_run, run_experiment, sweep)
from .statistics import bin_averaged_reference, reference_mean_r, reference_r_value


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="key=value config file")
    parser.add_argument("--model", choices=["syk", "xxz"])
    parser.add_argument("--size", "--n-site", dest="size", metavar="INT",
                        help="N (SYK Majorana count) or N_site (XXZ chain length)")
    parser.add_argument("--k", dest="k_strength", metavar="FLOAT",
                        help="SYK quadratic coupling strength K")
    parser.add_argument("--w", dest="w_disorder", metavar="FLOAT",
                        help="XXZ disorder strength W")
    parser.add_argument("--master-seed", dest="master_seed", metavar="INT")
    parser.add_argument("--n-samples", dest="n_samples", metavar="INT")
    parser.add_argument("--times", metavar="LIST",
                        help="comma list like 0.1,1,10 or log:0.1:100:25")
    parser.add_argument("--state-policy", dest="state_policy", metavar="POLICY",
                        help="all, central:<f>, or product:<pattern>")
    parser.add_argument("--exponent-policy", dest="exponent_policy",
                        choices=["upper_half", "lower_half", "all"])
    parser.add_argument("--unfold", choices=["fixed_i", "raw"])
    parser.add_argument("--rescale", choices=["true", "false"])
    parser.add_argument("--drop-largest", dest="drop_largest", choices=["true", "false"])
    parser.add_argument("--probe-kind", dest="probe_kind",
                        choices=["majorana", "plus_minus", "zz"])
    parser.add_argument("--output-dir", dest="output_dir", metavar="DIR")
    parser.add_argument("--worker-count", dest="worker_count", metavar="INT")
    parser.add_argument("--memory-budget-mb", dest="memory_budget_mb", metavar="FLOAT")


_CONFIG_DESTS = ("model", "size", "k_strength", "w_disorder", "master_seed",
                 "n_samples", "times", "state_policy", "exponent_policy",
                 "unfold", "rescale", "drop_largest", "probe_kind",
                 "output_dir", "worker_count", "memory_budget_mb")


def _overrides(args: argparse.Namespace) -> dict:
    return {name: getattr(args, name) for name in _CONFIG_DESTS
            if getattr(args, name, None) is not None}


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, _overrides(args))
    manifest = run_experiment(cfg)
    print(f"run complete: {cfg.output_dir}")
    counters = manifest.counters
    print(f"samples: {counters['n_samples_requested'] - counters['n_samples_failed']}"
          f"/{counters['n_samples_requested']} ok; "
          f"wall clock {manifest.wall_clock_seconds:.1f}s")
    for t, mean_r, stderr, n in _read_gap_csv(os.path.join(cfg.output_dir, "gap_ratio.csv")):
        print(f"t={t!r}: <r> = {mean_r:.4f} +/- {stderr:.4f} (n={n})")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, _overrides(args))
    grid: dict = {}
    for item in args.sweep or []:
        if "=" not in item:
            raise ConfigError(f"--sweep expects key=v1,v2,..., got {item!r}")
        key, values = item.split("=", 1)
        grid[key.strip()] = [v for v in values.split(",") if v.strip()]
    rows = sweep(cfg, grid, cfg.output_dir)
    print(f"sweep complete: {len(rows)} merged rows in "
          f"{os.path.join(cfg.output_dir, 'sweep_gap_ratio.csv')}")
    return 0


def _cmd_reference(args: argparse.Namespace) -> int:
    kinds = ["goe", "gue", "poisson"] if args.kind == "all" else [args.kind]
    results = []
    for kind in kinds:
        if args.monte_carlo:
            ref = reference_mean_r(kind, matrix_size=args.matrix_size,
                                   n_matrices=args.n_matrices, seed=args.seed)
            results.append((kind, ref.mean_r, ref.stderr, "monte_carlo"))
        else:
            results.append((kind, reference_r_value(kind), 0.0, "frozen"))
    for kind, mean_r, stderr, method in results:
        print(f"{kind}: <r> = {mean_r:.5f} +/- {stderr:.5f} ({method})")
    if args.output_dir:
        os.makedirs(args.output_dir, exist_ok=True)
        with open(os.path.join(args.output_dir, "reference_r.csv"), "w") as fh:
            fh.write("kind,mean_r,stderr,method\n")
            for kind, mean_r, stderr, method in results:
                fh.write(f"{kind},{mean_r!r},{stderr!r},{method}\n")
        edges = np.arange(41) * 0.1
        lo, hi = edges[:-1], edges[1:]
        cols = {kind: bin_averaged_reference(kind, lo, hi)
                for kind in ("goe", "gue", "poisson")}
        with open(os.path.join(args.output_dir, "reference_density.csv"), "w") as fh:
            fh.write("bin_left,bin_right,goe,gue,poisson\n")
            for b in range(lo.size):
                fh.write(f"{float(lo[b])!r},{float(hi[b])!r},"
                         f"{float(cols['goe'][b])!r},{float(cols['gue'][b])!r},"
                         f"{float(cols['poisson'][b])!r}\n")
        print(f"reference files written to {args.output_dir}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    options = {
        "exponent_policy": args.exponent_policy,
        "unfold": args.unfold,
        "rescale": None if args.rescale is None else _parse_bool(args.rescale),
        "drop_largest": None if args.drop_largest is None else _parse_bool(args.drop_largest),
    }
    rows = restat_run(args.input_dir, args.output_dir, **options)
    target = args.output_dir or args.input_dir
    print(f"statistics rewritten in {target}")
    for t, mean_r, stderr, n in rows:
        print(f"t={t!r}: <r> = {mean_r:.4f} +/- {stderr:.4f} (n={n})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrspec",
        description="Two-point correlation spectra of disordered quantum models")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured ensemble")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid and merge tables")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--sweep", action="append", metavar="KEY=V1,V2,...",
                         help="sweep values for one config field (repeatable)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_ref = sub.add_parser("reference", help="random-matrix reference values and curves")
    p_ref.add_argument("--kind", choices=["all", "goe", "gue", "poisson"], default="all")
    p_ref.add_argument("--monte-carlo", action="store_true",
                       help="estimate <r> by sampling instead of frozen values")
    p_ref.add_argument("--matrix-size", type=int, default=1000)
    p_ref.add_argument("--n-matrices", type=int, default=25)
    p_ref.add_argument("--seed", type=int, default=0)
    p_ref.add_argument("--output-dir", dest="output_dir", metavar="DIR")
    p_ref.set_defaults(func=_cmd_reference)

    p_stats = sub.add_parser("stats", help="re-derive statistics from a stored run")
    p_stats.add_argument("--input-dir", dest="input_dir", required=True, metavar="DIR")
    p_stats.add_argument("--output-dir", dest="output_dir", metavar="DIR")
    p_stats.add_argument("--exponent-policy", dest="exponent_policy",
                         choices=["upper_half", "lower_half", "all"])
    p_stats.add_argument("--unfold", choices=["fixed_i", "raw"])
    p_stats.add_argument("--rescale", choices=["true", "false"])
    p_stats.add_argument("--drop-largest", dest="drop_largest", choices=["true", "false"])
    p_stats.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
