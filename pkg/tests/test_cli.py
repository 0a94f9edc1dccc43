import json
import subprocess
import sys

import numpy as np
import pytest

from gflsr.cli import EXIT_CONFIG, EXIT_NUMERICAL, main
from gflsr.io import load_fit, read_table, write_table


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "data.csv"
    assert main(["simulate", "--seed", "3", "--out", str(path), "--H", "2"]) == 0
    return path


def test_simulate_writes_header(dataset):
    header, M = read_table(dataset)
    assert header[:2] == ["x1", "x2"] and header[-1] == "y10"
    assert M.shape == (100, 20)


def test_simulate_needs_out():
    assert main(["simulate"]) == EXIT_CONFIG


def test_fit_and_predict(dataset, tmp_path, capsys):
    fit_path = tmp_path / "fit.json"
    assert main(["fit", "--data", str(dataset), "--H", "2", "--out", str(fit_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["H"] == 2 and "corrected" in summary
    assert load_fit(fit_path).H == 2
    out = tmp_path / "pred.csv"
    assert main(["predict", "--fit", str(fit_path), "--data", str(dataset), "--out", str(out)]) == 0
    header, Y = read_table(out)
    assert header[0] == "y1" and Y.shape == (100, 10)


def test_fit_options(dataset, capsys):
    assert main(["fit", "--data", str(dataset), "--p", "10", "--H", "2",
                 "--variant", "PLS_SVD", "--deflation", "scores"]) == 0


def test_bootstrap(dataset, tmp_path):
    out = tmp_path / "ci.csv"
    assert main(["bootstrap", "--data", str(dataset), "--H", "1", "--B", "20", "--out", str(out)]) == 0
    assert out.read_text().startswith("parameter,index,lower,point,upper\n")


def test_bench_prints_csv(capsys):
    assert main(["bench", "sim2", "--reps", "2", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("seed,config_id")
    assert "\n1,sim2,50," in out


def test_bench_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "sim1", "reps": 2, "n_grid": [50], "noise": ["0.01"]}))
    out = tmp_path / "res"
    assert main(["bench", "sim1", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "sim1_report.csv").exists()


def test_bench_kind_mismatch(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "sim2"}))
    assert main(["bench", "sim1", "--config", str(cfg)]) == EXIT_CONFIG


@pytest.mark.parametrize("argv", [["bench", "sim9"], ["nonsense"], [],
                                  ["bench", "sim1", "--reps", "0"],
                                  ["fit"], ["fit", "--data", "/nonexistent.csv"]])
def test_config_errors(argv):
    assert main(argv) == EXIT_CONFIG


def test_bad_json(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["bench", "sim1", "--config", str(cfg)]) == EXIT_CONFIG


def test_numerical_failure(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    r = np.random.default_rng(0)
    write_table(path, ["x1", "x2", "y1"], np.column_stack([r.normal(size=(20, 2)), np.ones(20)]))
    assert main(["fit", "--data", str(path), "--H", "1"]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_corn_without_data(capsys):
    assert main(["corn"]) == EXIT_CONFIG
    assert "80x700" in capsys.readouterr().err


def test_help_exits_zero():
    assert main(["--help"]) == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gflsr", "bench", "sim9"], capture_output=True)
    assert res.returncode == EXIT_CONFIG
