"""Command line entry point: sweep.csv in, figure file out."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, EmptyFilterError, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bqcd-plot",
        description="Render benchmark sweep results as figures",
    )
    parser.add_argument("--csv", required=True, help="sweep.csv produced by the harness")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--scenario", help="keep only rows for this scenario label")
    parser.add_argument("--out", required=True, help="output image path (png, pdf, svg)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(csv_path=args.csv, kind=args.kind, out_path=args.out, scenario=args.scenario)
    try:
        render(spec)
    except (SchemaError, EmptyFilterError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
