"""Command-line driver.

Subcommands: `sweep` (Q-plane sweep from a config file), `single` (one Q with
full diagnostics), `levelset` (level-set curves for homogeneous families),
and `validate` (the cross-cutting invariant suites).

Exit codes: 0 success, 1 partial failures or failed checks, 2 configuration
errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bounds import check_bounds
from .errors import ConfigurationError
from .grid import Sym2
from .sweep import (
    ExperimentConfig,
    level_set,
    level_set_to_csv,
    record_lambdas,
    record_to_csv_row,
    run_single,
    run_sweep,
    CSV_HEADER,
)
from .validate import run_all


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pucci-homog",
        description="Numerical homogenization of Pucci-type operators on the 2-D torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--grid-n", type=int, default=None, help="override grid size")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--scheme", default=None, choices=["standard", "monotone", "filtered"],
                       help="override discretization scheme")

    p_sweep = sub.add_parser("sweep", help="run the configured Q-plane sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=None, help="parallel workers")
    p_sweep.add_argument("--quiet", action="store_true", help="suppress progress lines")

    p_single = sub.add_parser("single", help="one Q value with full diagnostics")
    add_common(p_single)
    p_single.add_argument("--lambda1", type=float, required=True)
    p_single.add_argument("--lambda2", type=float, required=True)
    p_single.add_argument("--a12", type=float, default=0.0, help="off-diagonal entry of Q")
    p_single.add_argument("--dump-fields", action="store_true",
                          help="write corrector/measure/Hessian CSVs to --out")

    p_level = sub.add_parser("levelset", help="level-set curves of the homogenized operators")
    add_common(p_level)
    p_level.add_argument("--level", type=float, default=1.0)
    p_level.add_argument("--angles", type=int, default=64)

    p_val = sub.add_parser("validate", help="run the invariant suites")
    p_val.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    if args.grid_n is not None:
        config.grid_n = args.grid_n
    if args.seed is not None:
        config.seed = args.seed
    if args.scheme is not None:
        from .cell import SchemeKind, SchemeSpec

        config.scheme = SchemeSpec(SchemeKind(args.scheme))
    jobs = getattr(args, "jobs", None)
    if jobs is not None:
        config.jobs = jobs
    return config


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    progress = None
    if not args.quiet:
        def progress(done, total, rec):
            l1, l2 = record_lambdas(rec)
            print(f"[{done}/{total}] Q=diag({l1:g}, {l2:g}) {rec.status} "
                  f"(E={rec.error:.3g}, {rec.iterations} its)")
    records = run_sweep(config, out_dir=args.out, progress=progress)
    failures = sum(1 for r in records if r.status != "ok")
    if failures:
        print(f"{failures}/{len(records)} records failed", file=sys.stderr)
        return 1
    return 0


def _cmd_single(args) -> int:
    config = _load_config(args)
    q = Sym2(args.lambda1, args.a12, args.lambda2)
    dump_dir = args.out if args.dump_fields else None
    record, extras = run_single(config, q, dump_dir=dump_dir)
    l1, l2 = record_lambdas(record)
    payload = {
        "lambda1": l1,
        "lambda2": l2,
        "a12": record.q.a12,
        "f_bar": record.f_bar,
        "l_bar": record.l_bar,
        "error": record.error,
        "c_bar_minus": None if record.c_bar_minus.is_unbounded else record.c_bar_minus.value,
        "c_bar_plus": None if record.c_bar_plus.is_unbounded else record.c_bar_plus.value,
        "verdict": check_bounds(record, config.slack).value if record.status == "ok" else None,
        "delta_num": config.slack,
        "iterations": record.iterations,
        "residual": record.residual,
        "measure_residual": record.measure_residual,
        "grid_n": record.grid_n,
        "scheme": record.scheme,
        "status": record.status,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out is not None:
        import os

        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "single.csv"), "w") as fh:
            fh.write(CSV_HEADER + "\n")
            fh.write(record_to_csv_row(record) + "\n")
    return 0 if record.status == "ok" else 1


def _cmd_levelset(args) -> int:
    config = _load_config(args)
    points = level_set(config, args.level, args.angles)
    failed = sum(1 for p in points if p.status.startswith("failed"))
    if args.out is not None:
        import os

        os.makedirs(args.out, exist_ok=True)
        level_set_to_csv(points, os.path.join(args.out, "levelset.csv"))
    else:
        for p in points:
            print(f"theta={p.theta:.4f} f_bar={p.f_bar:.6g} l_bar={p.l_bar:.6g} {p.status}")
    return 1 if failed else 0


def _cmd_validate(args) -> int:
    results = run_all(seed=args.seed)
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "single":
            return _cmd_single(args)
        if args.command == "levelset":
            return _cmd_levelset(args)
        if args.command == "validate":
            return _cmd_validate(args)
        parser.error(f"unknown command {args.command}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
