"""Readers for the simulator's CSV output contract (schema version 1)."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"
SLOT_DURATION_S = 0.25e-3


class SchemaError(RuntimeError):
    pass


@dataclass
class RunData:
    path: Path
    meta: dict
    connection: dict[int, float]  # donor_id -> fraction
    buffers: dict[str, np.ndarray]  # series -> (n, 2) [slot, bits]
    throughput_bps: dict[tuple[str, str], np.ndarray]  # (class, direction) -> bps samples

    @property
    def n_slots(self) -> int:
        return int(self.meta["n_slots"])


def load_run(path) -> RunData:
    path = Path(path)
    meta_path = path / "run_meta.json"
    if not meta_path.exists():
        raise SchemaError(f"{path}: run_meta.json missing")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema version {meta.get('schema_version')!r}, expected {SCHEMA_VERSION!r}"
        )

    connection: dict[int, float] = {}
    conn_path = path / "connection_time.csv"
    if conn_path.exists():
        with conn_path.open(encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                connection[int(row["donor_id"])] = float(row["fraction"])

    buffers: dict[str, list[tuple[int, int]]] = {}
    buf_path = path / "buffers.csv"
    if buf_path.exists():
        with buf_path.open(encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                buffers.setdefault(row["series"], []).append((int(row["slot"]), int(row["bits"])))

    window_slots = int(meta["window_slots"])
    n_slots = int(meta["n_slots"])
    throughput: dict[tuple[str, str], list[float]] = {}
    tp_path = path / "throughput.csv"
    if tp_path.exists():
        with tp_path.open(encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                start = int(row["window_start_slot"])
                w = min(window_slots, n_slots - start)
                if w <= 0:
                    continue
                key = (row["class"], row["direction"])
                throughput.setdefault(key, []).append(int(row["bits"]) / (w * SLOT_DURATION_S))

    return RunData(
        path=path,
        meta=meta,
        connection=connection,
        buffers={k: np.array(v, dtype=float) for k, v in buffers.items()},
        throughput_bps={k: np.array(v) for k, v in throughput.items()},
    )


def percentile_linear(samples: np.ndarray, p: float) -> float:
    """Linear-interpolated order statistic, matching the simulator's CdfTable."""
    return float(np.percentile(np.asarray(samples, dtype=float), p, method="linear"))
