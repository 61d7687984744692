#!/usr/bin/env python3
"""Desk-scale MTFA vs delay trade-off experiment over one scenario preset.

Sweeps all LLR-based procedures across a gamma ladder, writes sweep.csv, and
renders the trade-off figure if bqcd-plots is installed.

Example:
    python scripts/run_tradeoff_experiment.py --scenario gaussian10 \
        --trials 2000 --seed 7 --out results/gaussian10
"""

import argparse
import math
import subprocess
import sys
from pathlib import Path

from bqcd.cli import main as bqcd_main

LLR_PROCEDURES = "UcbCusum,PaUcbCusum,RoundRobin,PaRoundRobin,Greedy"
GLR_PROCEDURES = "PaUcbGlr,PaRoundRobinGlr"


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="gaussian10")
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="results/tradeoff")
    parser.add_argument(
        "--log-gammas",
        default="3,4,5,6",
        help="comma-separated ln(gamma) ladder; gamma = exp of each",
    )
    args = parser.parse_args(argv)

    gammas = ",".join(repr(math.exp(float(s))) for s in args.log_gammas.split(","))
    procedures = GLR_PROCEDURES if args.scenario == "beta10" else LLR_PROCEDURES
    code = bqcd_main(
        [
            "run",
            "--scenario",
            args.scenario,
            "--procedures",
            procedures,
            "--gammas",
            gammas,
            "--trials",
            str(args.trials),
            "--seed",
            str(args.seed),
            "--out",
            args.out,
        ]
    )
    if code != 0:
        return code

    sweep_csv = Path(args.out) / "sweep.csv"
    for kind in ("delay_vs_logmtfa", "cost_bars"):
        figure = Path(args.out) / f"{kind}.png"
        result = subprocess.run(
            [
                "bqcd-plot",
                "--csv",
                str(sweep_csv),
                "--kind",
                kind,
                "--scenario",
                args.scenario,
                "--out",
                str(figure),
            ],
            capture_output=True,
            text=True,
        )
        if result.returncode == 0:
            print(f"rendered {figure}")
        else:
            print(f"plotting skipped ({result.stderr.strip()})", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(run())
