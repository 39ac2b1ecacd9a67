#!/usr/bin/env python3
"""Quick look at threshold work-unit ratios of multilevel configurations
against the single-level baseline on one desk case.

Usage: python scripts/bench_preview.py [--case 1a] [--size 256] [--oracle 8000]
"""

import argparse
import sys

import mlprox as mp
from mlprox.harness import DESK_CASES


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--case", default="1a", choices=sorted(DESK_CASES))
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--oracle", type=int, default=8000)
    ap.add_argument("--max-iter", type=int, default=4000)
    args = ap.parse_args(argv)

    case = DESK_CASES[args.case]
    config = {
        "image": {"size": args.size},
        "benchmark": {
            "oracle_iters": args.oracle,
            "max_iter": args.max_iter,
            "repetitions": 1,
            "instances": [{"name": args.case, **case}],
            "solvers": [
                {"name": "fista", "kind": "fista"},
                {"name": "mm-fista-p1", "kind": "mmfista", "coarse": "fista",
                 "p": 1, "m": 5},
                {"name": "mm-fista-p1-ls", "kind": "mmfista", "coarse": "fista",
                 "p": 1, "m": 5, "tau_bar": "search"},
                {"name": "mm-fista-p2", "kind": "mmfista", "coarse": "fista",
                 "p": 2, "m": 5},
                {"name": "mm-fb-p1", "kind": "mmfista", "coarse": "fb",
                 "p": 1, "m": 5},
                {"name": "mm-smoothed-p1", "kind": "mmfista", "coarse": "smoothed",
                 "p": 1, "m": 5},
            ],
        },
    }
    report = mp.run_benchmark(config, progress=lambda m: print(f"  .. {m}"))
    print()
    header = f"{'solver':>18} | " + " | ".join(
        f"{q:>7}%" for q in report.rows[0].thresholds) + " | snr gain"
    print(header)
    print("-" * len(header))
    for row in report.rows:
        cells = []
        for hit, ratio in zip(row.hits, row.work_ratios()):
            if hit is None:
                cells.append("     --")
            else:
                cells.append(f"{ratio:7.3f}" if ratio is not None else f"{hit.work_units:7.0f}")
        print(f"{row.solver:>18} | " + " | ".join(cells)
              + f" | {row.snr_final - row.snr_z:+.2f} dB")
    return 0


if __name__ == "__main__":
    sys.exit(main())
