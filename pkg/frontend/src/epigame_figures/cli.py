"""Command line for the figure renderer."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import SchemaError, load_summary, render_panel


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epigame-figures",
        description="Render epidemic panels from epigame summary CSVs")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="2x2 panel (S, E, I, lockdown)")
    p.add_argument("--summary", required=True, help="summary CSV path")
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    p.add_argument("--title", help="optional figure title")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = load_summary(args.summary)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    render_panel(summary, out, title=args.title)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
