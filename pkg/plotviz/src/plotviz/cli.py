"""plotviz command line: densities | mise."""

from __future__ import annotations

import argparse
import sys

from .errors import PlotvizError
from .figures import plot_densities, plot_mise


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotviz",
                                     description="Render figures from logsplit outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_dens = sub.add_parser("densities", help="subset/full/combined density overlay")
    p_dens.add_argument("subsets", nargs="*", help="per-subset density.csv tables")
    p_dens.add_argument("--full", help="full-posterior density table")
    p_dens.add_argument("--combined", help="combined.csv from the combine step")
    p_dens.add_argument("--out", required=True, help="output image path")

    p_mise = sub.add_parser("mise", help="log-log rate figure")
    p_mise.add_argument("results", help="results.csv from an experiment")
    p_mise.add_argument("report", help="report.json from the same experiment")
    p_mise.add_argument("--out", required=True, help="output image path")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "densities":
            plot_densities(args.subsets, full_table=args.full,
                           combined_table=args.combined, out=args.out)
        else:
            plot_mise(args.results, args.report, out=args.out)
    except (PlotvizError, OSError) as exc:
        print(f"plotviz: {exc}", file=sys.stderr)
        return 1
    print(f"plotviz: wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
