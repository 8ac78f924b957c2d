"""Metric arithmetic and deterministic report artifacts."""

import json
import os

import numpy as np
import pytest

from clinn import evalreport, network, oracle, problems
from clinn.evalreport import (
    MetricsRecord, compute_metrics, export_prediction, improvement_ratio,
    mse, mse_at_time, prediction_csv, snap_time, write_metrics, _block_mean,
)
from clinn.problems import sample_grid


def test_mse_basic():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = a + 0.5
    assert mse(a, a) == 0.0
    assert mse(a, b) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        mse(a, np.zeros(3))


def test_snap_time_ties_go_low():
    times = [0.0, 1.0, 2.0]
    assert snap_time(times, 0.4) == (0, 0.0)
    assert snap_time(times, 0.5) == (0, 0.0)
    assert snap_time(times, 0.51) == (1, 1.0)
    assert snap_time(times, 99.0) == (2, 2.0)


def test_mse_at_time_restricts_to_one_slice():
    pred = np.zeros((3, 4))
    exact = np.zeros((3, 4))
    exact[1] = 2.0
    v, t_snap = mse_at_time(pred, exact, [0.0, 0.5, 1.0], 0.45)
    assert v == pytest.approx(4.0)
    assert t_snap == 0.5
    with pytest.raises(ValueError):
        mse_at_time(pred, exact, [0.0, 1.0], 0.5)


def test_improvement_ratio_reference_values():
    # headline percent reductions quoted for the two 1D benchmark groups
    assert improvement_ratio(1.15e-2, 3.11e-1) == pytest.approx(96.3,
                                                                abs=0.05)
    assert improvement_ratio(2.12e-1, 2.65e+1) == pytest.approx(99.2,
                                                                abs=0.05)
    assert improvement_ratio(2.0, 1.0) == pytest.approx(-100.0)
    with pytest.raises(ValueError):
        improvement_ratio(1.0, 0.0)


def test_metrics_record_validation():
    rec = MetricsRecord(case="1A", method="clinn", mse_all=0.5,
                        mse_slices=(0.1, 0.2, 0.3, 0.4),
                        slice_times=(0.05, 0.15, 0.25, 0.35),
                        grid_shape=(8, 16))
    d = rec.to_dict()
    assert d["mse_all"] == 0.5
    assert d["mse_t3"] == 0.3
    assert "improvement_vs_pinn" not in d
    d2 = rec.to_dict(mse_pinn=1.0)
    assert d2["improvement_vs_pinn"] == pytest.approx(50.0)
    with pytest.raises(ValueError):
        MetricsRecord(case="1A", method="m", mse_all=-1.0,
                      mse_slices=(0.0,) * 4, slice_times=(0.0,) * 4,
                      grid_shape=(8, 16))
    with pytest.raises(ValueError):
        MetricsRecord(case="1A", method="m", mse_all=0.0,
                      mse_slices=(0.0,) * 3, slice_times=(0.0,) * 3,
                      grid_shape=(8, 16))


def test_compute_metrics_against_shifted_exact():
    spec = problems.get_problem("2B")
    grid = sample_grid(spec, 20, 9)
    exact = oracle.exact(spec, grid.points)
    rec = compute_metrics(spec, "clinn", grid, exact + 0.3, exact)
    assert rec.mse_all == pytest.approx(0.09)
    assert all(v == pytest.approx(0.09) for v in rec.mse_slices)
    assert rec.grid_shape == (9, 20)
    # snapped times are actual grid times nearest the quarter fractions
    times = np.linspace(0.0, spec.T, 9)
    for frac, t_snap in zip(evalreport.SLICE_FRACTIONS, rec.slice_times):
        assert t_snap in times
        assert abs(t_snap - frac * spec.T) <= (times[1] - times[0]) / 2


def test_write_metrics_round_trip(tmp_path):
    rec = MetricsRecord(case="3A", method="ifnn", mse_all=0.25,
                        mse_slices=(0.1, 0.2, 0.3, 0.4),
                        slice_times=(0.25, 0.75, 1.25, 1.75),
                        grid_shape=(5, 10))
    path = write_metrics(rec, tmp_path / "m.json", mse_pinn=0.5)
    loaded = json.loads(open(path).read())
    assert loaded["mse_all"] == 0.25
    assert loaded["improvement_vs_pinn"] == pytest.approx(50.0)
    assert loaded["grid_shape"] == [5, 10]


def test_prediction_csv_layout():
    spec = problems.get_problem("1A")
    grid = sample_grid(spec, 6, 4)
    exact = oracle.exact(spec, grid.points)
    text = prediction_csv(spec, grid, exact + 1.0, exact)
    lines = text.strip().split("\n")
    assert lines[0] == "t,x,u_pred,u_exact,abs_err"
    assert len(lines) == grid.n_points + 1
    t, x, up, ue, err = (float(v) for v in lines[1].split(","))
    assert (t, x) == (0.0, 0.0)
    assert up - ue == pytest.approx(1.0)
    assert err == pytest.approx(1.0)


def test_prediction_csv_2d_layout():
    spec = problems.get_problem("2D")
    grid = sample_grid(spec, 4, 3)
    exact = oracle.exact(spec, grid.points)
    text = prediction_csv(spec, grid, exact, exact)
    lines = text.strip().split("\n")
    assert lines[0] == "t,x,y,u_pred,u_exact,abs_err"
    assert len(lines) == grid.n_points + 1


def test_block_mean_exact_values():
    a = np.arange(16.0).reshape(4, 4)
    out = _block_mean(a, 2, 2)
    np.testing.assert_allclose(out, [[2.5, 4.5], [10.5, 12.5]])
    same = _block_mean(a, 8, 8)
    np.testing.assert_array_equal(same, a)


def test_export_prediction_files_and_determinism(tmp_path):
    spec = problems.get_problem("2B")
    grid = sample_grid(spec, 14, 6)
    params = network.init(network.Architecture(width=6, depth=2,
                                               input_dim=2), seed=4)
    d1 = tmp_path / "a"
    d2 = tmp_path / "b"
    p1 = export_prediction(params, spec, grid, str(d1), method="clinn")
    p2 = export_prediction(params, spec, grid, str(d2), method="clinn")
    for key in ("csv", "heatmap_pred", "heatmap_err", "profiles"):
        b1 = open(p1[key], "rb").read()
        b2 = open(p2[key], "rb").read()
        assert b1 == b2
        assert len(b1) > 0
    rec = p1["record"]
    assert rec.case == "2B"
    assert rec.method == "clinn"
    assert np.isfinite(rec.mse_all)
    csv_lines = open(p1["csv"]).read().strip().split("\n")
    assert len(csv_lines) == 6 * 14 + 1
    svg = open(p1["heatmap_pred"]).read()
    assert "case 2B clinn" in svg
    # axis labels carry the domain extents
    assert ">-4<" in svg and ">6<" in svg and ">0<" in svg
    prof = open(p1["profiles"]).read()
    assert prof.count("<polyline") == 8     # four panels, two lines each


def test_export_prediction_2d(tmp_path):
    spec = problems.get_problem("2D")
    grid = sample_grid(spec, 6, 4)
    params = network.init(network.Architecture(width=6, depth=2,
                                               input_dim=3), seed=4)
    paths = export_prediction(params, spec, grid, str(tmp_path), method="m")
    assert paths["record"].grid_shape == (4, 6, 6)
    csv_lines = open(paths["csv"]).read().strip().split("\n")
    assert len(csv_lines) == 4 * 36 + 1
    svg = open(paths["heatmap_pred"]).read()
    assert "(x, y) at t = 6" in svg
    assert os.path.getsize(paths["profiles"]) > 0
