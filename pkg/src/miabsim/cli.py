"""Command line front end: single runs, seed sweeps, and policy comparison.

    miabsim run --preset standard --seed 1 --out out/std
    miabsim run --preset load_aware --seeds 1..10 --out out/la
    miabsim compare out/std/pooled out/la/pooled
"""
from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config, preset_config, validate
from .engine import ConservationError, run_simulation
from .mac import SLOT_DURATION_S
from .metrics import (
    BUFFERS_CSV,
    CONNECTION_CSV,
    RUN_META,
    SCHEMA_VERSION,
    THROUGHPUT_CSV,
    CdfTable,
    write_outputs,
)

CLASSES = ("Passenger", "Pedestrian")
DIRECTIONS = ("DL", "UL")
PERCENTILES = (10, 50, 90)


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def _load_throughput(path: Path) -> dict[tuple[str, str], np.ndarray]:
    """Pooled per-window throughput in bps, keyed by (class, direction)."""
    meta = json.loads((path / RUN_META).read_text(encoding="utf-8"))
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise SystemExit(
            f"schema version mismatch in {path}: {meta.get('schema_version')} != {SCHEMA_VERSION}"
        )
    window_slots = meta["window_slots"]
    n_slots = meta["n_slots"]
    out: dict[tuple[str, str], list[float]] = {(c, d): [] for c in CLASSES for d in DIRECTIONS}
    with (path / THROUGHPUT_CSV).open(encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            start = int(row["window_start_slot"])
            w = min(window_slots, n_slots - start)
            key = (row["class"], row["direction"])
            if key in out and w > 0:
                out[key].append(int(row["bits"]) / (w * SLOT_DURATION_S))
    return {k: np.array(v) for k, v in out.items()}


def _summary_line(run_dir: Path) -> str:
    fractions = []
    with (run_dir / CONNECTION_CSV).open(encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            fractions.append((int(row["donor_id"]), float(row["fraction"])))
    frac_txt = " ".join(f"d{donor}={frac:.3f}" for donor, frac in sorted(fractions))
    pooled = _load_throughput(run_dir)
    parts = []
    for direction in ("UL", "DL"):
        samples = pooled[("Passenger", direction)]
        if samples.size:
            cdf = CdfTable(samples)
            pcts = "/".join(f"{cdf.percentile(p) / 1e6:.2f}" for p in PERCENTILES)
            parts.append(f"pass {direction} p10/p50/p90 {pcts} Mbps")
    return f"connection fractions: {frac_txt} | " + " | ".join(parts)


def _run_one(args: tuple) -> str:
    cfg, seed, out_dir = args
    state = run_simulation(cfg, seed)
    write_outputs(state.ledger, out_dir, config_echo=cfg.echo(), seed=seed)
    return str(out_dir)


def _pool_runs(seed_dirs: list[Path], pooled_dir: Path) -> None:
    """Concatenate per-seed throughput samples into one pooled directory."""
    pooled_dir.mkdir(parents=True, exist_ok=True)
    first_meta = json.loads((seed_dirs[0] / RUN_META).read_text(encoding="utf-8"))
    rows = []
    for sd in seed_dirs:
        with (sd / THROUGHPUT_CSV).open(encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            rows.extend(reader)
    with (pooled_dir / THROUGHPUT_CSV).open("w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ue_id", "class", "direction", "window_start_slot", "bits"])
        w.writerows(rows)
    meta = dict(first_meta)
    meta["pooled_from"] = [p.name for p in seed_dirs]
    (pooled_dir / RUN_META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    # connection fractions: mean across seeds
    acc: dict[int, list[float]] = {}
    slots_acc: dict[int, int] = {}
    for sd in seed_dirs:
        with (sd / CONNECTION_CSV).open(encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                donor = int(row["donor_id"])
                acc.setdefault(donor, []).append(float(row["fraction"]))
                slots_acc[donor] = slots_acc.get(donor, 0) + int(row["slots"])
    with (pooled_dir / CONNECTION_CSV).open("w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["donor_id", "slots", "fraction"])
        for donor in sorted(acc):
            mean_frac = sum(acc[donor]) / len(seed_dirs)
            w.writerow([donor, slots_acc[donor], f"{mean_frac:.9f}"])
    shutil.copy(seed_dirs[0] / BUFFERS_CSV, pooled_dir / BUFFERS_CSV)


def cmd_run(args) -> int:
    try:
        if args.config:
            cfg = parse_config(args.config)
        elif args.preset:
            cfg = preset_config(args.preset)
        else:
            cfg = RunConfig()
        if args.duration_slots:
            cfg.run.duration_slots = args.duration_slots
        if args.snapshot_cadence:
            cfg.metrics.snapshot_cadence_slots = args.snapshot_cadence
        problems = validate(cfg)
        if problems:
            raise ConfigError(problems)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2

    out_root = Path(args.out or cfg.run.out_dir)
    seeds = _parse_seeds(args.seeds) if args.seeds else [args.seed if args.seed is not None else cfg.run.seed]
    try:
        if len(seeds) == 1:
            _run_one((cfg, seeds[0], out_root))
            print(f"[seed {seeds[0]}] {_summary_line(out_root)}")
        else:
            seed_dirs = [out_root / f"seed_{s}" for s in seeds]
            jobs = max(1, args.jobs)
            work = [(cfg, s, d) for s, d in zip(seeds, seed_dirs)]
            if jobs > 1:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    list(pool.map(_run_one, work))
            else:
                for item in work:
                    _run_one(item)
            _pool_runs(seed_dirs, out_root / "pooled")
            for s, d in zip(seeds, seed_dirs):
                print(f"[seed {s}] {_summary_line(d)}")
            print(f"pooled aggregate written to {out_root / 'pooled'}")
    except (ConservationError, RuntimeError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_compare(args) -> int:
    dir_a, dir_b = Path(args.dir_a), Path(args.dir_b)
    for d in (dir_a, dir_b):
        if not (d / THROUGHPUT_CSV).exists():
            print(f"missing run directory or throughput file: {d}", file=sys.stderr)
            return 2
    pooled_a = _load_throughput(dir_a)
    pooled_b = _load_throughput(dir_b)
    print(f"percentile deltas, {dir_b} relative to {dir_a} (positive = B higher)")
    for cls in CLASSES:
        for direction in DIRECTIONS:
            a = pooled_a[(cls, direction)]
            b = pooled_b[(cls, direction)]
            if a.size == 0 or b.size == 0:
                print(f"  {cls:10s} {direction}: no samples")
                continue
            ca, cb = CdfTable(a), CdfTable(b)
            deltas = []
            for p in PERCENTILES:
                va, vb = ca.percentile(p), cb.percentile(p)
                delta = 0.0 if va == vb else (vb - va) / va * 100.0 if va else float("inf")
                deltas.append(f"p{p}: {delta:+.2f}%")
            print(f"  {cls:10s} {direction}: " + "  ".join(deltas))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="miabsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one run or a seed sweep")
    p_run.add_argument("--config", type=Path, help="TOML config file")
    p_run.add_argument("--preset", choices=("standard", "load_aware"), help="built-in experiment preset")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--seeds", type=str, default=None, help="sweep, e.g. 1..10 or 1,2,5")
    p_run.add_argument("--out", type=str, default=None, help="output directory")
    p_run.add_argument("--duration-slots", dest="duration_slots", type=int, default=None)
    p_run.add_argument("--snapshot-cadence", dest="snapshot_cadence", type=int, default=None)
    p_run.add_argument("--jobs", type=int, default=1, help="parallel seed runs")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="percentile deltas between two run/pooled directories")
    p_cmp.add_argument("dir_a")
    p_cmp.add_argument("dir_b")
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
