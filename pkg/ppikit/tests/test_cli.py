"""Tests for the command line interface."""

import json

import pandas as pd
import pytest
from pytest import approx

from ppikit import __version__
from ppikit.cli import run
from ppikit.establishing.constants import SCHEMA_VERSION
from ppikit.processing import emit_csv

SCENARIO = {
    "dgp": {"n": 300, "p": 2, "beta": [1, 2, -1]},
    "mechanism": {"kind": "MCAR", "pi": 0.3},
    "scenario": {"regime": {"kind": "Holdout", "n_external": 200},
                 "methods": ["cc", "ppi", "ppipp", "crossppi"],
                 "mc": {"reps": 4, "seed": 3}, "target": "ols"},
}


@pytest.fixture
def data_csv(tmp_path, make_data):
    dataset, predictions = make_data(0, n=300)
    path = tmp_path / "data.csv"
    emit_csv(dataset, path, predictions)
    return path


@pytest.fixture
def scenario_json(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SCENARIO), encoding="utf-8")
    return path


def test_estimate_ppipp_four_rows(four_rows_csv, capsys):
    code = run(["estimate", "--input", str(four_rows_csv), "--method", "ppipp",
                "--target", "mean"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "PPIpp"
    assert out["lambda"] == 0.0
    assert out["theta"] == [approx(2.0)]
    assert out["schema_version"] == SCHEMA_VERSION


def test_estimate_methods(data_csv, capsys):
    for method, tag in [("cc", "Classical"), ("PPI", "PPI"), ("crossppi", "CrossPPI")]:
        assert run(["estimate", "--input", str(data_csv), "--method", method,
                    "--target", "ols", "--seed", "1"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["method"] == tag
        assert out["coefficients"] == ["intercept", "x1", "x2"]
        assert all(lo < hi for lo, hi in zip(out["ci_lower"], out["ci_upper"]))


def test_estimate_crossppboot(data_csv, capsys):
    argv = ["estimate", "--input", str(data_csv), "--method", "crossppboot",
            "--boot", "100", "--seed", "2", "--level", "0.8"]
    assert run(argv) == 0
    first = json.loads(capsys.readouterr().out)
    assert first["ci_kind"] == "percentile"
    assert first["ci_level"] == 0.8
    assert run(argv) == 0
    assert json.loads(capsys.readouterr().out) == first


def test_estimate_fixed_lambda(four_rows_csv, capsys):
    assert run(["estimate", "--input", str(four_rows_csv), "--method", "ppipp",
                "--lambda", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lambda"] == 1.0
    assert out["theta"] == [approx(5.0)]


@pytest.mark.parametrize("argv", [
    ["estimate", "--input", "data.csv", "--unknown"],
    ["estimate"],
    ["estimate", "--input", "data.csv", "--target", "median"],
    ["frobnicate"],
    [],
])
def test_usage_errors(argv, capsys):
    assert run(argv) == 1
    assert capsys.readouterr().out == ""


def test_data_errors(tmp_path, four_rows_csv, capsys):
    missing = tmp_path / "missing.csv"
    assert run(["estimate", "--input", str(missing)]) == 2
    assert "No such file" in capsys.readouterr().err
    assert run(["estimate", "--input", str(four_rows_csv), "--method", "ppi",
                "--lambda", "0.5"]) == 2
    assert run(["estimate", "--input", str(four_rows_csv), "--method", "magic"]) == 2
    assert run(["estimate", "--input", str(four_rows_csv), "--method", "ppipp",
                "--level", "1.5"]) == 2
    assert run(["estimate", "--input", str(four_rows_csv), "--method", "oracle"]) == 2
    assert capsys.readouterr().out == ""


def test_version(capsys):
    assert run(["version"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"schema_version": SCHEMA_VERSION, "version": __version__}


def test_diagnose(data_csv, capsys):
    assert run(["diagnose", "--input", str(data_csv), "--pretrained",
                "--permutations", "20", "--seed", "1"]) == 0
    captured = capsys.readouterr()
    out = json.loads(captured.out)
    assert [row["name"] for row in out["per_covariate"]] == ["x1", "x2"]
    assert out["has_pretrained"] is True
    assert out["prediction_shift"] is not None
    assert out["recommendation"]["advisory"] is True
    assert "Recommended variant" in captured.err


def test_simulate(tmp_path, scenario_json, capsys):
    out = tmp_path / "table.csv"
    audit = tmp_path / "audit.jsonl"
    assert run(["simulate", "--config", str(scenario_json), "--out", str(out),
                "--audit", str(audit)]) == 0
    assert "Wrote 12 rows" in capsys.readouterr().err
    table = pd.read_csv(out)
    assert list(table.columns) == ["method", "coefficient", "coverage", "mean_width",
                                   "mean_bias", "reps"]
    assert len(table) == 4 * 3
    assert (table["reps"] == 4).all()
    assert table["method"].unique().tolist() == ["Classical", "PPI", "PPIpp",
                                                 "CrossPPI"]
    assert len(pd.read_json(audit, lines=True)) == 4 * 4 * 3


def test_simulate_independent_of_jobs(tmp_path, scenario_json):
    serial, parallel = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    base = ["simulate", "--config", str(scenario_json)]
    assert run(base + ["--out", str(serial), "--jobs", "1"]) == 0
    assert run(base + ["--out", str(parallel), "--jobs", "2"]) == 0
    assert serial.read_bytes() == parallel.read_bytes()


def test_simulate_seed_override(tmp_path, scenario_json, monkeypatch):
    first, second, third = (tmp_path / f"{n}.csv" for n in ("a", "b", "c"))
    base = ["simulate", "--config", str(scenario_json)]
    assert run(base + ["--out", str(first), "--seed", "11"]) == 0
    monkeypatch.setenv("PPIKIT_SEED", "11")
    assert run(base + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert run(base + ["--out", str(third), "--seed", "12"]) == 0
    assert third.read_bytes() != first.read_bytes()


def test_simulate_errors(tmp_path, scenario_json):
    out = str(tmp_path / "table.csv")
    assert run(["simulate", "--config", str(tmp_path / "none.json"), "--out", out]) == 2
    assert run(["simulate", "--config", str(scenario_json),
                "--out", str(tmp_path / "nodir" / "table.csv")]) == 2
    assert run(["simulate", "--config", str(scenario_json), "--out", out,
                "--jobs", "0"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dgp": SCENARIO["dgp"], "extra": 1}), encoding="utf-8")
    assert run(["simulate", "--config", str(bad), "--out", out]) == 2
