"""Command-line entry point: ``streampca-bench run|grid``.

Errors are reported as a single JSON line on stderr, e.g.
``{"error": "ConfigError", "message": "..."}``, with exit status 2 for
invalid input and 1 for failures during the run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from ..errors import ConfigError, CSVFormatError, StreamPCAError
from ..stochastic import LearningSchedule
from .config import ALGORITHMS, ExperimentConfig, FpcaOptions
from .io import summarize, write_records, write_summary
from .runner import grid_search_schedule, run_experiment

# CLI flag -> config field
_OVERRIDES = {"algorithm": "algorithm", "n": "n", "d": "d", "q": "q", "q_computed": "q_computed",
              "n0": "n0", "seed": "master_seed", "reps": "replications", "data": "data",
              "missing": "missing_fraction", "amnesic": "amnesic", "init": "init"}


def _parser():
    p = argparse.ArgumentParser(prog="streampca-bench",
                                description="Monte Carlo benchmark of streaming PCA estimators.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="TOML experiment file")
        sp.add_argument("--algorithm", choices=ALGORITHMS)
        sp.add_argument("--n", type=int)
        sp.add_argument("--d", type=int)
        sp.add_argument("--q", type=int)
        sp.add_argument("--q-computed", dest="q_computed", type=int)
        sp.add_argument("--n0", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--init", choices=("batch", "single"))
        sp.add_argument("--amnesic", type=float)
        sp.add_argument("--data", metavar="PATH", help="stream rows of a CSV file instead of simulating")
        sp.add_argument("--has-header", action="store_true", default=None)
        sp.add_argument("--uncentered", action="store_true",
                        help="file data: no mean subtraction, uncentered compression loss")
        sp.add_argument("--no-reference", action="store_true",
                        help="file data: skip the batch PCA reference (L left blank)")
        sp.add_argument("--fpca", action="store_true", help="run in a cubic B-spline basis")
        sp.add_argument("--fpca-p", type=int)
        sp.add_argument("--fpca-alpha", type=float)
        sp.add_argument("--fpca-metric", choices=("grid", "l2"))
        sp.add_argument("--missing", type=float, metavar="F", help="fraction of coordinates hidden")
        sp.add_argument("--c", type=float, help="learning-rate constant")
        sp.add_argument("--alpha", type=float, help="learning-rate exponent in (1/2, 1]")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    run = sub.add_parser("run", help="run one experiment")
    common(run)
    run.add_argument("--out", metavar="PATH", default="results.csv")
    run.add_argument("--summary", metavar="PATH")
    run.add_argument("--timing", action="store_true",
                     help="fill timing and (approximate) memory columns; output is then not reproducible")
    run.add_argument("--memory", action="store_true", help="trace Python allocations for peak_mem_bytes")

    grid = sub.add_parser("grid", help="grid search of the learning-rate constant")
    common(grid)
    grid.add_argument("--grid", type=float, nargs="+", default=[0.01, 0.1, 1.0, 10.0, 100.0])
    grid.add_argument("--alphas", type=float, nargs="+", default=[1.0, 2.0 / 3.0])
    return p


def build_config(args) -> ExperimentConfig:
    """Config file (if any) with command-line flags layered on top."""
    if args.config:
        try:
            cfg = ExperimentConfig.from_toml(args.config)
        except OSError as exc:
            raise ConfigError(f"{args.config}: {exc.strerror}") from exc
    else:
        if args.algorithm is None:
            raise ConfigError("--algorithm is required without --config")
        cfg = ExperimentConfig(algorithm=args.algorithm)
    changes = {field: getattr(args, flag) for flag, field in _OVERRIDES.items()
               if getattr(args, flag) is not None}
    if args.has_header:
        changes["has_header"] = True
    if args.uncentered:
        changes["centered"] = False
    if args.no_reference:
        changes["reference"] = False
    fpca_flags = {"p": args.fpca_p, "alpha": args.fpca_alpha, "metric": args.fpca_metric}
    if args.fpca or any(v is not None for v in fpca_flags.values()):
        changes["fpca"] = replace(cfg.fpca or FpcaOptions(),
                                  **{k: v for k, v in fpca_flags.items() if v is not None})
    if args.c is not None or args.alpha is not None:
        old = cfg.schedule
        try:
            changes["schedule"] = LearningSchedule(
                args.c if args.c is not None else (old.c if old else 1.0),
                args.alpha if args.alpha is not None else (old.alpha if old else 1.0))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return replace(cfg, **changes)


def _run(args):
    cfg = build_config(args).resolved()
    records = run_experiment(cfg, threads=args.threads, measure_memory=args.memory)
    write_records(args.out, records, include_timing=args.timing)
    if args.summary:
        write_summary(args.summary, records, include_timing=args.timing)
    for algorithm, n, d, q, reps, mean, se, _ in summarize(records):
        shown = "n/a" if mean is None else f"{mean:.6g} +/- {se:.2g}"
        print(f"{algorithm} n={n} d={d} q={q} reps={reps} L={shown}")


def _grid(args):
    cfg = build_config(args).resolved()
    results = grid_search_schedule(cfg, tuple(args.grid), tuple(args.alphas), threads=args.threads)
    for alpha, res in results.items():
        cells = ", ".join(f"c={c:g}: {m:.5g} ({s:.2g})" for c, (m, s) in res.scores.items())
        print(f"alpha={alpha:.4g} best c={res.best_c:g} L={res.mean_L:.6g}  [{cells}]")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        (_run if args.command == "run" else _grid)(args)
    except (ConfigError, CSVFormatError) as exc:
        _error(exc)
        return 2
    except (StreamPCAError, ValueError, ArithmeticError, OSError) as exc:
        _error(exc)
        return 1
    return 0


def _error(exc):
    info = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "column"):
        if getattr(exc, attr, None) is not None:
            info[attr] = getattr(exc, attr)
    print(json.dumps(info), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
