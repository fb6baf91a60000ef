"""plots --in <csv> --family <name> --out <path> [filters]"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FAMILIES, render
from .stats import read_rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    parser.add_argument("--in", dest="infile", type=Path, required=True)
    parser.add_argument("--family", choices=FAMILIES, required=True)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--side", type=int, default=None)
    parser.add_argument("--ratio", default=None)
    parser.add_argument("--view", dest="view_mode", default=None)
    args = parser.parse_args(argv)
    try:
        rows = read_rows(args.infile)
        args.out.parent.mkdir(parents=True, exist_ok=True)
        meta = render(rows, args.family, args.out, side=args.side,
                      ratio=args.ratio, view_mode=args.view_mode)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.family} -> {args.out} {meta}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
