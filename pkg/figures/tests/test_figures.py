"""Figure-generation tests against the committed fixture run outputs."""
import csv
import json
from pathlib import Path

import pytest

from miabfigs.io import SchemaError, load_run, percentile_linear
from miabfigs.plots import (
    plot_buffer_timeseries,
    plot_connection_bars,
    plot_throughput_cdf,
    render_all,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def runs():
    return {
        "standard": load_run(FIXTURES / "standard"),
        "load_aware": load_run(FIXTURES / "load_aware"),
    }


def read_csv(path):
    with Path(path).open(encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_render_all_produces_four_figures_and_sidecars(runs, tmp_path):
    written = render_all(runs, tmp_path)
    names = {p.name for p in written}
    assert {
        "fig_connection_time.png",
        "fig_buffers.png",
        "fig_throughput_cdf_ul.png",
        "fig_throughput_cdf_dl.png",
    } <= names
    assert {
        "connection_bars.csv",
        "buffer_timeseries.csv",
        "throughput_cdf_ul.csv",
        "throughput_cdf_dl.csv",
        "throughput_percentiles_ul.csv",
        "throughput_percentiles_dl.csv",
    } <= names
    for p in written:
        assert p.exists() and p.stat().st_size > 0


def test_sidecar_p90_matches_primary_percentile(runs, tmp_path):
    # the simulator's own percentile implementation is the reference
    from miabsim.metrics import CdfTable

    for direction in ("UL", "DL"):
        plot_throughput_cdf(runs, direction, tmp_path)
        rows = read_csv(tmp_path / f"throughput_percentiles_{direction.lower()}.csv")
        assert len(rows) == 4  # 2 policies x 2 classes
        for row in rows:
            samples = runs[row["policy"]].throughput_bps[(row["class"], direction)]
            want = CdfTable(samples)
            assert abs(float(row["p90_bps"]) - want.percentile(90)) <= 1e-9
            assert abs(float(row["p50_bps"]) - want.percentile(50)) <= 1e-9
            assert abs(float(row["p10_bps"]) - want.percentile(10)) <= 1e-9


def test_connection_bars_reflect_fixture_fractions(runs, tmp_path):
    plot_connection_bars(runs, tmp_path)
    rows = read_csv(tmp_path / "connection_bars.csv")
    by_key = {(r["policy"], int(r["donor_id"])): float(r["fraction"]) for r in rows}
    for policy, run in runs.items():
        for donor, frac in run.connection.items():
            assert by_key[(policy, donor)] == pytest.approx(frac, abs=1e-9)
    # donors the policy never used plot as zero-height bars
    assert by_key[("load_aware", 2)] == 0.0


def test_single_policy_input_single_group(runs, tmp_path):
    plot_connection_bars({"standard": runs["standard"]}, tmp_path)
    rows = read_csv(tmp_path / "connection_bars.csv")
    assert {r["policy"] for r in rows} == {"standard"}


def test_buffer_timeseries_normalized_and_styled(runs, tmp_path):
    plot_buffer_timeseries(runs, tmp_path)
    rows = read_csv(tmp_path / "buffer_timeseries.csv")
    times = [float(r["time_norm"]) for r in rows]
    assert min(times) >= 0.0 and max(times) <= 1.0
    series = {r["series"] for r in rows}
    assert series == {"mt_ul_bits", "donors_dl_bits", "du_dl_bits"}
    policies = {r["policy"] for r in rows}
    assert policies == {"standard", "load_aware"}


def test_buffer_timeseries_missing_series_fatal(runs, tmp_path):
    import copy

    broken = copy.copy(runs["standard"])
    broken.buffers = {k: v for k, v in runs["standard"].buffers.items() if k != "mt_ul_bits"}
    with pytest.raises(ValueError):
        plot_buffer_timeseries({"standard": broken}, tmp_path)


def test_cdf_curves_monotone(runs, tmp_path):
    plot_throughput_cdf(runs, "UL", tmp_path)
    rows = read_csv(tmp_path / "throughput_cdf_ul.csv")
    by_curve = {}
    for r in rows:
        by_curve.setdefault((r["policy"], r["class"]), []).append(
            (float(r["throughput_mbps"]), float(r["quantile"]))
        )
    assert len(by_curve) == 4
    for pts in by_curve.values():
        xs = [x for x, _ in pts]
        qs = [q for _, q in pts]
        assert xs == sorted(xs)
        assert qs == sorted(qs)


def test_rendering_idempotent_byte_stable(runs, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    render_all(runs, a)
    render_all(runs, b)
    for name in ("fig_connection_time.png", "fig_buffers.png", "connection_bars.csv",
                 "throughput_percentiles_ul.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_schema_mismatch_fatal(tmp_path):
    bad = tmp_path / "badrun"
    bad.mkdir()
    (bad / "run_meta.json").write_text(json.dumps({"schema_version": "99", "n_slots": 10, "window_slots": 4}))
    with pytest.raises(SchemaError):
        load_run(bad)


def test_missing_meta_fatal(tmp_path):
    with pytest.raises(SchemaError):
        load_run(tmp_path)


def test_percentile_linear_matches_numpy(runs):
    import numpy as np

    samples = runs["standard"].throughput_bps[("Passenger", "UL")]
    assert percentile_linear(samples, 50) == float(np.percentile(samples, 50))


def test_cli_end_to_end(tmp_path, capsys):
    from miabfigs.cli import main

    rc = main([
        "--standard", str(FIXTURES / "standard"),
        "--load-aware", str(FIXTURES / "load_aware"),
        "--out", str(tmp_path),
    ])
    assert rc == 0
    assert (tmp_path / "fig_throughput_cdf_dl.png").exists()


def test_cli_schema_error_exit_code(tmp_path, capsys):
    from miabfigs.cli import main

    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "run_meta.json").write_text(json.dumps({"schema_version": "0"}))
    rc = main(["--standard", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "schema" in capsys.readouterr().err
