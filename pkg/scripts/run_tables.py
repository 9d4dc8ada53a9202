#!/usr/bin/env python3
"""Desk-scale reproduction of the experiment tables.

Generates random MNL markets (v ~ U[0,1], w ~ Exp(1), n = m), solves every
size-feasible optimum/bound, and writes per-instance rows plus min/mean/max
summary tables under --out.

Example:
    python scripts/run_tables.py --sizes 2,3,4 --seeds 20 --out results/
"""

import argparse
import sys

from tsa.cli import main as cli_main


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--sizes", default="2,3,4")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")
    args = p.parse_args()
    return cli_main(["tables", "--sizes", args.sizes, "--seeds", str(args.seeds),
                     "--seed", str(args.seed), "--jobs", str(args.jobs),
                     "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
