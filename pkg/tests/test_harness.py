"""Experiment-matrix runner and report builder."""

import json

import pytest

from clinn.harness import DeskConfig, build_report, run_matrix

TINY = DeskConfig(width=6, depth=2, grid_nx=10, grid_nt=4, epochs=(3, 3),
                  lr=1e-3, eval_nx=12, eval_nt=5)


def test_run_matrix_collects_results(tmp_path):
    out = run_matrix(["2A"], ["clinn", "pinn"], str(tmp_path), desk=TINY,
                     seeds=(5,))
    assert out["failures"] == []
    assert [r["run"] for r in out["results"]] == ["2A_clinn_s5",
                                                  "2A_pinn_s5"]
    for r in out["results"]:
        assert (tmp_path / r["run"] / "checkpoint.bin").exists()
        assert r["metrics"]["mse_all"] >= 0
    report = (tmp_path / "report.md").read_text()
    assert "## case 2A" in report
    assert "| clinn |" in report and "| pinn |" in report
    assert "improvement vs pinn" in report
    bundle = json.loads((tmp_path / "metrics_bundle.json").read_text())
    assert len(bundle["results"]) == 2
    assert bundle["failures"] == []


def test_run_matrix_records_failures_and_continues(tmp_path):
    out = run_matrix(["9Z", "2A"], ["pinn"], str(tmp_path), desk=TINY,
                     seeds=(5,))
    assert [f["run"] for f in out["failures"]] == ["9Z_pinn_s5"]
    assert "unknown case" in out["failures"][0]["error"]
    assert [r["run"] for r in out["results"]] == ["2A_pinn_s5"]
    report = (tmp_path / "report.md").read_text()
    assert "## failures" in report
    assert "9Z_pinn_s5" in report


def test_run_matrix_empty_request(tmp_path):
    out = run_matrix([], [], str(tmp_path))
    assert out["results"] == [] and out["failures"] == []
    assert "_no runs requested_" in (tmp_path / "report.md").read_text()


def _result(case, method, seed, mse):
    metrics = {"mse_all": mse, "mse_t1": mse, "mse_t2": mse,
               "mse_t3": mse, "mse_t4": mse}
    return {"run": f"{case}_{method}_s{seed}", "case": case,
            "method": method, "seed": seed, "dir": "x", "metrics": metrics}


def test_build_report_medians_and_ratio():
    results = [
        _result("1B", "clinn", 7, 0.1), _result("1B", "clinn", 11, 0.3),
        _result("1B", "clinn", 13, 0.2),
        _result("1B", "pinn", 7, 1.0), _result("1B", "pinn", 11, 2.0),
        _result("1B", "pinn", 13, 4.0),
    ]
    report = build_report(results, [])
    # medians 0.2 and 2.0 give a 90% reduction
    assert "| clinn | 2.000e-01 | 90.0% |" in report
    assert "| pinn | 2.000e+00 | 0.0% |" in report
    # preset order puts the full method first in every table
    assert report.index("| clinn | 7 |") < report.index("| pinn | 7 |")


def test_build_report_without_baseline():
    report = build_report([_result("3B", "ifnn", 7, 0.5)], [])
    assert "| ifnn | 5.000e-01 | n/a |" in report
