"""Run metrics: throughput windows, buffer snapshots, attachment intervals,
CDF percentiles, and the CSV output contract consumed by the plots tool."""
from __future__ import annotations

import csv
import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mac import SLOT_DURATION_S

SCHEMA_VERSION = "1"

THROUGHPUT_CSV = "throughput.csv"
BUFFERS_CSV = "buffers.csv"
CONNECTION_CSV = "connection_time.csv"
RUN_META = "run_meta.json"


@dataclass(frozen=True)
class ThroughputSample:
    ue_id: int
    ue_class: str
    direction: str
    window_start_slot: int
    bits_delivered: int
    window_slots: int


@dataclass(frozen=True)
class BufferSnapshot:
    slot: int
    series: str
    bits: int


class CdfTable:
    """Sorted sample container with linearly interpolated percentiles."""

    def __init__(self, samples):
        arr = np.sort(np.asarray(list(samples), dtype=float))
        if arr.size == 0:
            raise ValueError("CdfTable needs at least one sample")
        self.values = arr

    def percentile(self, p: float) -> float:
        if not 0.0 <= p <= 100.0:
            raise ValueError("percentile must be in [0, 100]")
        return float(np.percentile(self.values, p, method="linear"))


def percentile(cdf: CdfTable, p: float) -> float:
    return cdf.percentile(p)


def record_window(deliveries, window_slots: int = 400) -> list[ThroughputSample]:
    """Turn per-flow delivered bit counts into throughput samples.

    deliveries: iterable of (ue_id, ue_class, direction, window_start_slot,
    bits). Zero-bit windows are kept: explicit zeros matter for the CDFs.
    """
    return [
        ThroughputSample(ue, cls, direction, start, int(bits), window_slots)
        for ue, cls, direction, start, bits in deliveries
    ]


def window_throughput_bps(sample: ThroughputSample) -> float:
    return sample.bits_delivered / (sample.window_slots * SLOT_DURATION_S)


def connection_time_report(records, total_slots: int) -> dict[int, tuple[int, float]]:
    """Per-donor attachment time: donor_id -> (slots, fraction of run)."""
    out: dict[int, int] = {}
    for rec in records:
        end = rec.end_slot if rec.end_slot is not None else total_slots
        out[rec.donor_id] = out.get(rec.donor_id, 0) + max(end - rec.start_slot, 0)
    return {donor: (slots, slots / total_slots if total_slots else 0.0) for donor, slots in sorted(out.items())}


@dataclass
class MetricsLedger:
    """Append-only record of one run's outputs plus conservation counters."""

    window_slots: int
    snapshot_cadence: int
    n_slots: int = 0
    throughput_rows: list[tuple[int, str, str, int, int]] = field(default_factory=list)
    buffer_rows: list[tuple[int, str, int]] = field(default_factory=list)
    attachments: list = field(default_factory=list)
    offered_bits: int = 0
    delivered_bits: int = 0
    dropped_bits: int = 0
    n_ta_events: int = 0
    half_duplex_violations: int = 0

    def add_window(self, window_start: int, flows, delivered_bits) -> None:
        for flow in flows:
            self.throughput_rows.append(
                (flow.ue_id, flow.ue_class, flow.direction, window_start, int(delivered_bits[flow.flow_id]))
            )

    def add_snapshot(self, slot: int, series_bits: dict[str, int]) -> None:
        for series, bits in series_bits.items():
            self.buffer_rows.append((slot, series, int(bits)))


def _git_describe(repo_hint: Path | None = None) -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=repo_hint or Path(__file__).parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return "unknown"


def write_outputs(ledger: MetricsLedger, out_dir, *, config_echo: dict, seed: int) -> list[Path]:
    """Write the four run outputs (UTF-8, LF, header rows). Deterministic for
    identical (config, seed) runs."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise RuntimeError(f"output directory {out} is not writable: {exc}") from exc

    written = []

    tp = out / THROUGHPUT_CSV
    with tp.open("w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ue_id", "class", "direction", "window_start_slot", "bits"])
        w.writerows(ledger.throughput_rows)
    written.append(tp)

    bp = out / BUFFERS_CSV
    with bp.open("w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "series", "bits"])
        w.writerows(ledger.buffer_rows)
    written.append(bp)

    cp = out / CONNECTION_CSV
    report = connection_time_report(ledger.attachments, ledger.n_slots)
    with cp.open("w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["donor_id", "slots", "fraction"])
        for donor_id, (slots, fraction) in report.items():
            w.writerow([donor_id, slots, f"{fraction:.9f}"])
    written.append(cp)

    mp = out / RUN_META
    meta = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "n_slots": ledger.n_slots,
        "window_slots": ledger.window_slots,
        "snapshot_cadence": ledger.snapshot_cadence,
        "offered_bits": ledger.offered_bits,
        "delivered_bits": ledger.delivered_bits,
        "dropped_bits": ledger.dropped_bits,
        "n_ta_events": ledger.n_ta_events,
        "half_duplex_violations": ledger.half_duplex_violations,
        "git_describe": _git_describe(),
        "config": config_echo,
    }
    mp.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(mp)
    return written


@dataclass
class MetricsConfig:
    window_slots: int = 400
    snapshot_cadence_slots: int = 40
