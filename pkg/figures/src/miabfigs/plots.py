"""Figure rendering from simulator run data, with sidecar CSVs carrying the
plotted numbers so downstream checks never parse images.

Styling mirrors the experiment conventions: blue = standard policy, red =
load-aware; buffer series dotted (MT UL) / solid (donors DL) / dashed
(DU DL); CDF curves solid for passengers, dashed for pedestrians.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import RunData, percentile_linear

POLICY_COLORS = {"standard": "tab:blue", "load_aware": "tab:red"}
POLICY_LABELS = {"standard": "standard", "load_aware": "load-aware"}
CLASS_STYLES = {"Passenger": "-", "Pedestrian": "--"}


def _color(policy: str) -> str:
    return POLICY_COLORS.get(policy, "tab:gray")


def _label(policy: str) -> str:
    return POLICY_LABELS.get(policy, policy)


def _write_csv(path: Path, header, rows) -> None:
    with Path(path).open("w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def plot_connection_bars(runs: dict[str, RunData], out_dir) -> tuple[Path, Path]:
    """Grouped bars: attachment-time fraction per donor, one group per policy."""
    out_dir = Path(out_dir)
    donors = sorted({d for run in runs.values() for d in run.connection})
    policies = list(runs)
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    width = 0.8 / max(len(policies), 1)
    rows = []
    for k, policy in enumerate(policies):
        fractions = [runs[policy].connection.get(d, 0.0) for d in donors]
        xs = np.arange(len(donors)) + (k - (len(policies) - 1) / 2) * width
        ax.bar(xs, fractions, width=width * 0.95, color=_color(policy), label=_label(policy))
        rows += [(policy, d, f"{f:.9f}") for d, f in zip(donors, fractions)]
    ax.set_xticks(np.arange(len(donors)))
    ax.set_xticklabels([f"Donor {d}" for d in donors])
    ax.set_ylabel("fraction of simulation time connected")
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    img = out_dir / "fig_connection_time.png"
    fig.savefig(img, dpi=130)
    plt.close(fig)
    sidecar = out_dir / "connection_bars.csv"
    _write_csv(sidecar, ["policy", "donor_id", "fraction"], rows)
    return img, sidecar


# figure series -> (source series predicate, line style)
_BUFFER_GROUPS = (
    ("mt_ul_bits", lambda s: s == "mt_ul_bits", ":"),
    ("donors_dl_bits", lambda s: s.startswith("donor_dl_bits"), "-"),
    ("du_dl_bits", lambda s: s == "du_dl_bits", "--"),
)


def plot_buffer_timeseries(runs: dict[str, RunData], out_dir) -> tuple[Path, Path]:
    """Buffered bits over normalized simulation time: MT UL (dotted), donors
    DL summed (solid), DU DL (dashed), one color per policy."""
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    rows = []
    for policy, run in runs.items():
        if not run.buffers:
            raise ValueError(f"{run.path}: buffers.csv has no series")
        for group_name, pred, style in _BUFFER_GROUPS:
            members = [k for k in run.buffers if pred(k)]
            if not members:
                raise ValueError(f"{run.path}: missing buffer series for {group_name}")
            slots = run.buffers[members[0]][:, 0]
            total = np.zeros_like(slots, dtype=float)
            for m in members:
                total += run.buffers[m][:, 1]
            t_norm = slots / max(run.n_slots, 1)
            ax.plot(t_norm, total, style, color=_color(policy),
                    label=f"{_label(policy)} {group_name}", linewidth=1.1)
            rows += [
                (policy, group_name, f"{t:.9f}", int(b)) for t, b in zip(t_norm, total)
            ]
    ax.set_xlabel("normalized simulation time")
    ax.set_ylabel("buffered bits")
    ax.set_xlim(0, 1)
    ax.legend(fontsize=7)
    fig.tight_layout()
    img = out_dir / "fig_buffers.png"
    fig.savefig(img, dpi=130)
    plt.close(fig)
    sidecar = out_dir / "buffer_timeseries.csv"
    _write_csv(sidecar, ["policy", "series", "time_norm", "bits"], rows)
    return img, sidecar


def plot_throughput_cdf(runs: dict[str, RunData], direction: str, out_dir) -> tuple[Path, Path, Path]:
    """Empirical throughput CDFs for the given direction: one curve per
    (class, policy), passengers solid / pedestrians dashed, with p10/p90
    markers. Sidecars carry the curve points and the percentiles."""
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    curve_rows = []
    pct_rows = []
    for policy, run in runs.items():
        for ue_class in ("Passenger", "Pedestrian"):
            samples = run.throughput_bps.get((ue_class, direction))
            if samples is None or samples.size == 0:
                raise ValueError(f"{run.path}: no {ue_class} {direction} throughput samples")
            xs = np.sort(samples) / 1e6
            qs = np.arange(1, xs.size + 1) / xs.size
            ax.plot(xs, qs, CLASS_STYLES[ue_class], color=_color(policy),
                    label=f"{_label(policy)} {ue_class.lower()}s", linewidth=1.1)
            p10 = percentile_linear(samples, 10)
            p50 = percentile_linear(samples, 50)
            p90 = percentile_linear(samples, 90)
            for p, v in ((10, p10), (90, p90)):
                ax.plot([v / 1e6], [p / 100], "o", color=_color(policy), markersize=3.5)
            pct_rows.append(
                (policy, ue_class, direction, f"{p10:.9f}", f"{p50:.9f}", f"{p90:.9f}")
            )
            step = max(xs.size // 400, 1)
            curve_rows += [
                (policy, ue_class, f"{x:.9f}", f"{q:.9f}") for x, q in zip(xs[::step], qs[::step])
            ]
    ax.set_xlabel("throughput [Mbps]")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7)
    ax.set_title(f"{direction} throughput")
    fig.tight_layout()
    img = out_dir / f"fig_throughput_cdf_{direction.lower()}.png"
    fig.savefig(img, dpi=130)
    plt.close(fig)
    curves = out_dir / f"throughput_cdf_{direction.lower()}.csv"
    _write_csv(curves, ["policy", "class", "throughput_mbps", "quantile"], curve_rows)
    pcts = out_dir / f"throughput_percentiles_{direction.lower()}.csv"
    _write_csv(pcts, ["policy", "class", "direction", "p10_bps", "p50_bps", "p90_bps"], pct_rows)
    return img, curves, pcts


def render_all(runs: dict[str, RunData], out_dir) -> list[Path]:
    """Render the four figure analogues plus sidecars; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    written += plot_connection_bars(runs, out_dir)
    written += plot_buffer_timeseries(runs, out_dir)
    written += plot_throughput_cdf(runs, "UL", out_dir)
    written += plot_throughput_cdf(runs, "DL", out_dir)
    return written
