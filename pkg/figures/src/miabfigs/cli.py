"""Render the experiment figures from one or two simulator run directories.

    miab-figs --standard out/std/pooled --load-aware out/la/pooled --out figs/
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .io import SchemaError, load_run
from .plots import render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="miab-figs", description=__doc__)
    parser.add_argument("--standard", type=Path, help="run/pooled directory for the standard policy")
    parser.add_argument("--load-aware", dest="load_aware", type=Path,
                        help="run/pooled directory for the load-aware policy")
    parser.add_argument("--out", type=Path, required=True, help="output directory for figures and sidecars")
    args = parser.parse_args(argv)
    if not args.standard and not args.load_aware:
        parser.error("at least one of --standard / --load-aware is required")
    runs = {}
    try:
        if args.standard:
            runs["standard"] = load_run(args.standard)
        if args.load_aware:
            runs["load_aware"] = load_run(args.load_aware)
        written = render_all(runs, args.out)
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
