#!/usr/bin/env python3
"""Standalone martingale diagnostic: pre-change drift of the SR-like sum.

Example:
    python scripts/run_martingale_check.py --scenario gaussian10 --paths 10000
"""

import argparse
import sys

from bqcd.cli import main as bqcd_main


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="gaussian10")
    parser.add_argument("--paths", type=int, default=10_000)
    parser.add_argument("--horizon", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/oracle")
    args = parser.parse_args(argv)
    return bqcd_main(
        [
            "oracle",
            "--scenario",
            args.scenario,
            "--paths",
            str(args.paths),
            "--horizon",
            str(args.horizon),
            "--seed",
            str(args.seed),
            "--out",
            args.out,
        ]
    )


if __name__ == "__main__":
    sys.exit(run())
