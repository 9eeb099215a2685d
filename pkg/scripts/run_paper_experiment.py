#!/usr/bin/env python3
"""End-to-end experiment driver: ten-seed sweeps for both topology
adaptation policies, a percentile comparison, and the four figures.

    python scripts/run_paper_experiment.py --out out --jobs 2
"""
from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path


def sh(args: list[str]) -> None:
    print("+", " ".join(args), flush=True)
    subprocess.run(args, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--seeds", default="1..10")
    parser.add_argument("--jobs", type=int, default=2)
    args = parser.parse_args()

    out = args.out
    py = sys.executable
    for policy in ("standard", "load_aware"):
        sh([py, "-m", "miabsim.cli", "run", "--preset", policy,
            "--seeds", args.seeds, "--jobs", str(args.jobs),
            "--out", str(out / policy)])
    sh([py, "-m", "miabsim.cli", "compare",
        str(out / "standard" / "pooled"), str(out / "load_aware" / "pooled")])
    sh([py, "-m", "miabfigs.cli",
        "--standard", str(out / "standard" / "pooled"),
        "--load-aware", str(out / "load_aware" / "pooled"),
        "--out", str(out / "figs")])
    print(f"done; figures in {out / 'figs'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
