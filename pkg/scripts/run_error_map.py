#!/usr/bin/env python3
"""Q-plane error map for the separable standard Pucci operator on an r=2
periodic checkerboard: the linearization error E(Q) = Fbar - Lbar over a grid
of diagonal Q, with the averaged semi-concavity bounds per record.

Writes records.csv / report.json under --out.
"""

import argparse
import sys

from pucci_homog.cell import SolverParams
from pucci_homog.sweep import ExperimentConfig, run_sweep


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/error_map")
    parser.add_argument("--grid-n", type=int, default=80)
    parser.add_argument("--r", type=float, default=2.0, help="coefficient contrast")
    parser.add_argument("--step", type=float, default=0.25, help="lambda grid step")
    parser.add_argument("--extent", type=float, default=3.0)
    parser.add_argument("--scheme", default="standard", choices=["standard", "monotone", "filtered"])
    parser.add_argument("--family", default="pucci", choices=["pucci", "pucci_max"])
    parser.add_argument("--tol", type=float, default=1e-8)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    config = ExperimentConfig(
        operator={
            "family": args.family,
            "a": {"kind": "checkerboard", "high": args.r},
            "A": {"kind": "checkerboard", "high": args.r, "scale": 3.0},
        },
        q_grid={"kind": "diag_range", "min": -args.extent, "max": args.extent, "step": args.step},
        grid_n=args.grid_n,
        seed=args.seed,
        solver=SolverParams(tol=args.tol),
        jobs=args.jobs,
    )
    from pucci_homog.sweep import _scheme_from_config

    config.scheme = _scheme_from_config(args.scheme)

    def progress(done, total, rec):
        print(f"[{done}/{total}] Q=diag({rec.q.a11:g}, {rec.q.a22:g}) E={rec.error:.3g} {rec.status}")

    records = run_sweep(config, out_dir=args.out, progress=progress)
    failures = sum(1 for r in records if r.status != "ok")
    print(f"wrote {len(records)} records to {args.out} ({failures} failures)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
