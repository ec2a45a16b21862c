from __future__ import annotations

import io
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convwatt.bundled import data_path
from convwatt.energy_trace import (
    UNATTRIBUTED,
    Annotation,
    AnnotationLog,
    EnergyDataset,
    EnergyRow,
    PowerTrace,
    TraceError,
    breakdown_from_trace,
    integrate_energy,
    layer_type_breakdown,
    load_annotations,
    load_energy_dataset,
    load_power_trace,
    per_layer_energy,
    total_energy,
    write_annotations,
    write_energy_dataset,
    write_power_trace,
)
from convwatt.features import FeatureVector


def right_endpoint_oracle(ts, ps, begin, end):
    """Plain-loop right-endpoint sum with clipped intervals, in mJ."""
    total = 0.0
    for i in range(len(ts) - 1):
        lo, hi = max(ts[i], begin), min(ts[i + 1], end)
        if hi > lo:
            total += ps[i + 1] * (hi - lo)
    return total * 1e-6


def constant_trace(power_mw, n, step_us=1000.0):
    return PowerTrace(np.arange(n) * step_us, np.full(n, float(power_mw)))


# Loading ----------------------------------------------------------------------


def test_three_sample_trace():
    trace = load_power_trace("timestamp_us,power_mw\n0,1\n1000,2\n2000,3\n")
    assert len(trace) == 3
    assert trace.nominal_rate == 1000


def test_nominal_rate_directive_and_seconds_column():
    trace = load_power_trace("# nominal_rate=500\ntimestamp_s,power_mw\n0,1\n0.002,2\n")
    assert trace.nominal_rate == 500
    np.testing.assert_array_equal(trace.timestamps_us, [0.0, 2000.0])


def test_one_khz_trace_length():
    n = 2060
    trace = constant_trace(4500.0, n)
    assert len(trace) == 2060
    assert trace.nominal_rate == 1000
    assert trace.duration_s == pytest.approx(2.059)


def test_malformed_value_reports_line():
    with pytest.raises(TraceError, match="line 3"):
        load_power_trace("timestamp_us,power_mw\n0,1\n1000,abc\n")


def test_non_increasing_timestamps_rejected():
    with pytest.raises(TraceError):
        PowerTrace(np.array([0.0, 1000.0, 1000.0]), np.array([1.0, 1.0, 1.0]))


def test_negative_power_rejected():
    with pytest.raises(TraceError):
        PowerTrace(np.array([0.0, 1.0]), np.array([1.0, -1.0]))


def test_annotation_end_before_begin_rejected():
    with pytest.raises(TraceError):
        AnnotationLog([Annotation("conv1", "Conv", 100.0, 100.0)])


def test_overlapping_annotations_rejected():
    with pytest.raises(TraceError, match="overlap"):
        AnnotationLog([Annotation("a", "Conv", 0.0, 10.0), Annotation("b", "Conv", 5.0, 20.0)])


def test_overlap_allowed_across_runs():
    log_ = AnnotationLog([Annotation("a", "Conv", 0.0, 10.0, 0), Annotation("a", "Conv", 5.0, 20.0, 1)])
    assert log_.run_ids == [0, 1]


def test_trace_and_annotation_round_trip():
    trace = PowerTrace(np.array([0.0, 1000.0, 2500.5]), np.array([0.0, 1234.5678, 99.0]), nominal_rate=800)
    buf = io.StringIO()
    write_power_trace(trace, buf)
    again = load_power_trace(buf.getvalue())
    np.testing.assert_array_equal(again.timestamps_us, trace.timestamps_us)
    np.testing.assert_array_equal(again.power_mw, trace.power_mw)
    assert again.nominal_rate == 800

    log_ = AnnotationLog([Annotation("conv1", "Conv", 0.0, 1000.0), Annotation("pool1", "MaxPool", 1000.0, 2000.0)])
    buf = io.StringIO()
    write_annotations(log_, buf)
    assert list(load_annotations(buf.getvalue())) == list(log_)


def test_load_from_path(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("timestamp_us,power_mw\n0,5\n10,5\n")
    assert len(load_power_trace(p)) == 2


# Integration -------------------------------------------------------------------


def test_constant_power_window():
    trace = constant_trace(1000.0, 11)
    assert integrate_energy(trace, 0.0, 10_000.0) == pytest.approx(10.0, rel=1e-12)


def test_two_samples_use_right_endpoint():
    trace = PowerTrace(np.array([0.0, 1000.0]), np.array([0.0, 2000.0]))
    assert integrate_energy(trace, 0.0, 1000.0) == pytest.approx(2.0, rel=1e-12)


def test_linear_ramp():
    ts = np.arange(1001) * 1000.0
    ps = np.linspace(0.0, 1000.0, 1001)
    trace = PowerTrace(ts, ps)
    expected = right_endpoint_oracle(ts.tolist(), ps.tolist(), 0.0, 1e6)
    assert expected == pytest.approx(500.5, rel=1e-12)
    assert total_energy(trace) == pytest.approx(500.5, rel=1e-12)


def test_partial_interval_is_pro_rata():
    trace = PowerTrace(np.array([0.0, 1000.0]), np.array([0.0, 2000.0]))
    assert integrate_energy(trace, 250.0, 750.0) == pytest.approx(1.0, rel=1e-12)


def test_window_outside_trace_rejected():
    trace = constant_trace(1.0, 3)
    with pytest.raises(TraceError):
        integrate_energy(trace, 10.0, 5.0)


@st.composite
def traces(draw):
    n = draw(st.integers(2, 60))
    steps = draw(st.lists(st.floats(1.0, 5000.0), min_size=n - 1, max_size=n - 1))
    powers = draw(st.lists(st.floats(0.0, 1e4), min_size=n, max_size=n))
    ts = np.concatenate([[0.0], np.cumsum(steps)])
    return PowerTrace(ts, np.array(powers))


@settings(deadline=None)
@given(traces(), st.data())
def test_matches_loop_oracle(trace, data):
    a = data.draw(st.floats(trace.start, trace.end))
    b = data.draw(st.floats(trace.start, trace.end))
    lo, hi = min(a, b), max(a, b)
    if not lo < hi:
        return
    expected = right_endpoint_oracle(trace.timestamps_us.tolist(), trace.power_mw.tolist(), lo, hi)
    assert integrate_energy(trace, lo, hi) == pytest.approx(expected, rel=1e-9, abs=1e-12)


@settings(deadline=None)
@given(traces(), st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8))
def test_partition_conservation(trace, cuts):
    edges = np.sort(trace.start + np.array(cuts) * (trace.end - trace.start))
    edges = np.concatenate([[trace.start], edges, [trace.end]])
    parts = sum(integrate_energy(trace, lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if lo < hi)
    assert parts == pytest.approx(total_energy(trace), rel=1e-9, abs=1e-12)


@settings(deadline=None)
@given(traces(), st.data())
def test_enlarging_window_never_decreases(trace, data):
    pts = sorted(data.draw(st.floats(trace.start, trace.end)) for _ in range(4))
    if not pts[1] < pts[2]:
        return
    inner = integrate_energy(trace, pts[1], pts[2])
    outer = integrate_energy(trace, pts[0], pts[3])
    assert outer >= inner - 1e-12


# Per-layer energy --------------------------------------------------------------


def test_single_annotation_equals_total():
    trace = constant_trace(750.0, 101)
    result = per_layer_energy(trace, AnnotationLog([Annotation("all", "Conv", trace.start, trace.end)]))
    assert result.measurements[0].energy_mj == pytest.approx(total_energy(trace), rel=1e-12)


def test_back_to_back_annotations_sum_to_total():
    rng = np.random.default_rng(0)
    trace = PowerTrace(np.arange(200) * 1000.0, rng.uniform(0, 5000, 200))
    log_ = AnnotationLog([Annotation("a", "Conv", 0.0, 73_500.0), Annotation("b", "Fc", 73_500.0, 199_000.0)])
    result = per_layer_energy(trace, log_)
    assert sum(m.energy_mj for m in result.measurements) == pytest.approx(total_energy(trace), rel=1e-12)


def test_identical_runs_have_zero_std():
    power = np.tile(np.linspace(100, 900, 10), 5)
    trace = PowerTrace(np.arange(50) * 1000.0, power)
    log_ = AnnotationLog([Annotation("conv1", "Conv", r * 10_000.0, r * 10_000.0 + 9000.0, r) for r in range(5)])
    single = integrate_energy(trace, 0.0, 9000.0)
    (summary,) = per_layer_energy(trace, log_).summary()
    assert summary.runs == 5
    assert summary.std_energy_mj == pytest.approx(0.0, abs=1e-9)
    assert summary.mean_energy_mj == pytest.approx(single, rel=1e-12)


def test_out_of_span_annotation_skipped_with_warning(caplog):
    trace = constant_trace(1.0, 11)
    log_ = AnnotationLog([Annotation("in", "Conv", 0.0, 5000.0), Annotation("late", "Conv", 9000.0, 20_000.0)])
    with caplog.at_level(logging.WARNING):
        result = per_layer_energy(trace, log_)
    assert result.skipped == 1
    assert [m.layer_name for m in result.measurements] == ["in"]
    assert "outside trace span" in caplog.text


# Breakdown ----------------------------------------------------------------------


def test_eigen_tx1_conv_share():
    b = layer_type_breakdown([("Conv", 7856.84, 1.7354), ("Other", 1447.16, 0.327)], total_energy_mj=9304.00)
    assert b["Conv"].energy_pct == pytest.approx(84.44, abs=0.05)


def test_openblas_conv_share_with_unattributed_rest():
    rows = [("Conv", 4883.26, 1.52), ("Pooling", 761.83, 0.23)]
    b = layer_type_breakdown(rows, total_energy_mj=7830.07)
    assert b["Conv"].energy_pct == pytest.approx(62.36, abs=0.05)
    assert b[UNATTRIBUTED].energy_mj == pytest.approx(7830.07 - 4883.26 - 761.83)
    assert sum(r.energy_pct for r in b.rows) == pytest.approx(100.0, abs=1e-9)


def test_single_kind_is_100_percent():
    b = layer_type_breakdown([("Conv", 3.0, 1.0), ("Conv", 2.0, 1.0)])
    assert len(b.rows) == 1
    assert b["Conv"].energy_pct == 100.0 and b["Conv"].time_pct == 100.0


def test_total_smaller_than_rows_rejected():
    with pytest.raises(TraceError):
        layer_type_breakdown([("Conv", 10.0, 1.0)], total_energy_mj=5.0)


@given(st.floats(0.01, 100.0))
def test_breakdown_scale_invariant(c):
    rng = np.random.default_rng(1)
    power = rng.uniform(10, 1000, 30)
    ts = np.arange(30) * 1000.0
    log_ = AnnotationLog([Annotation("a", "Conv", 0.0, 12_000.0), Annotation("b", "Fc", 12_000.0, 29_000.0)])
    base = breakdown_from_trace(PowerTrace(ts, power), log_)
    scaled = breakdown_from_trace(PowerTrace(ts, power * c), log_)
    for r0, r1 in zip(base.rows, scaled.rows):
        assert r1.energy_pct == pytest.approx(r0.energy_pct, rel=1e-9)


def test_bundled_demo_trace_reproduces_shares():
    trace = load_power_trace(data_path("googlenet_eigen_tx1_trace.csv"))
    b = breakdown_from_trace(trace, load_annotations(data_path("googlenet_eigen_tx1_annotations.csv")))
    assert b["Conv"].energy_pct == pytest.approx(84.44, abs=0.05)
    assert b["Conv"].energy_mj == pytest.approx(7856.84, rel=1e-9)

    trace = load_power_trace(data_path("googlenet_openblas_tx1_trace.csv"))
    b = breakdown_from_trace(trace, load_annotations(data_path("googlenet_openblas_tx1_annotations.csv")))
    assert b["Conv"].energy_pct == pytest.approx(62.36, abs=0.05)
    assert UNATTRIBUTED in [r.kind for r in b.rows]


# Energy datasets ------------------------------------------------------------------


def _row(net, energy, mac):
    return EnergyRow(net, "Conv", f"{net}/Conv", energy, FeatureVector(("MAC_sum",), (mac,)))


def test_dataset_round_trip():
    ds = EnergyDataset([_row("a", 1.5, 10), _row("b", 2.25, 20)], "prov", ("MAC_sum",))
    buf = io.StringIO()
    write_energy_dataset(ds, buf)
    again = load_energy_dataset(buf.getvalue())
    assert again.provenance == "prov"
    assert again.networks == ["a", "b"]
    np.testing.assert_array_equal(again.energies, ds.energies)
    np.testing.assert_array_equal(again.matrix(), ds.matrix())


def test_dataset_rejects_non_positive_energy():
    with pytest.raises(TraceError):
        EnergyDataset([_row("a", 0.0, 10)], "p", ("MAC_sum",))


def test_bundled_layer_type_dataset():
    ds = load_energy_dataset(data_path("layer_type_Eigen-TX1.csv"))
    assert ds.provenance == "Eigen-TX1"
    assert ds.networks == ["AlexNet", "GoogleNet", "VGG_CNN_S"]
    assert len(ds.of_kind("Conv")) == 3
