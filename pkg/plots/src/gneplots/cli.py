"""gneplots render --in aggregate/ --out figs/"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import RenderError, render_all


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="gneplots", description="Render benchmark figures.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("render", help="render all aggregate CSVs in a directory")
    sp.add_argument("--in", dest="in_dir", type=Path, required=True)
    sp.add_argument("--out", dest="out_dir", type=Path, required=True)
    args = p.parse_args(argv)
    try:
        outputs = render_all(args.in_dir, args.out_dir)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
