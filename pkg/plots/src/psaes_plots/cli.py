"""Batch figure renderer: --kind, --in (repeatable), --out."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from psaes_plots.figures import KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psaes-plots",
        description="Render figures from optimizer experiment CSVs",
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True, action="append",
                        type=Path, help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, type=Path, help="output image path")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = render(FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                                   output=args.out))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(result.output)
    if "argmin_kappa" in result.annotations:
        print(f"annotated minimum at kappa={result.annotations['argmin_kappa']:g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
