"""``plots`` command line entry point: one figure per invocation."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureError, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plots",
        description="render experiment CSV output as publication figures")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--in", dest="inputs", action="append", required=True,
                    metavar="CSV", help="input table; repeat for several "
                    "(regret/poa draw one curve per file)")
    ap.add_argument("--out", required=True, metavar="IMG",
                    help="output image path (format from the extension)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render(FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                                out=args.out))
    except FigureError as exc:
        print(f"plots: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
