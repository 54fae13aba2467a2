import json
import subprocess
import sys

import numpy as np
import pytest

from robustlab import cli
from robustlab.core import NumericError


@pytest.fixture
def dataset(tmp_path):
    X = np.random.default_rng(0).standard_normal((60, 3))
    path = tmp_path / "data.csv"
    np.savetxt(path, X, delimiter=",")
    return path


def test_estimate_json_and_determinism(tmp_path, dataset):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["estimate", "--data", str(dataset), "--seed", "4", "--delta", "0.05", "--out", str(a)]) == 0
    assert cli.main(["estimate", "--data", str(dataset), "--seed", "4", "--delta", "0.05", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    obj = json.loads(a.read_text())
    mu_hat = np.array(obj["mu_hat"])
    expected = np.array(obj["mu_tilde"]) + obj["s"] * np.sqrt(obj["eps"]) * obj["sigma_v"] * np.array(obj["v"])
    assert np.allclose(mu_hat, expected)


def test_estimate_config_file(tmp_path, dataset):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta": 0.1, "s": -1, "seed": 2}))
    out = tmp_path / "o.json"
    assert cli.main(["estimate", "--data", str(dataset), "--config", str(cfg), "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert obj["s"] == -1 and obj["delta"] == 0.1 and obj["seed"] == 2
    # explicit flags win over the config file
    assert cli.main(["estimate", "--data", str(dataset), "--config", str(cfg), "--s", "1", "--delta", "0.2", "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert obj["s"] == 1 and obj["delta"] == 0.2 and obj["seed"] == 2


def test_usage_errors(tmp_path, dataset, capsys):
    assert cli.main(["estimate"]) == 2
    assert cli.main(["estimate", "--data", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    assert cli.main(["estimate", "--data", str(bad)]) == 2
    assert cli.main(["estimate", "--data", str(dataset), "--delta", "0.9"]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["experiment"]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    assert cli.main(["theorycheck", "--config", str(cfg)]) == 2
    assert cli.main(["--help"]) == 0


def test_numeric_error_exit_code(monkeypatch, dataset):
    def boom(*args, **kwargs):
        raise NumericError("no convergence", residual=0.5)

    monkeypatch.setattr("robustlab.spread_estimator.subg_estimate", boom)
    assert cli.main(["estimate", "--data", str(dataset)]) == 1


def test_experiment_command(tmp_path):
    cfg = {
        "estimators": ["filter", "median_of_means"],
        "sample": {"family": "gaussian", "n": 40, "d": 2},
        "eps_grid": [0.1],
        "delta_grid": [None],
        "trials": 2,
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "exp.csv"
    assert cli.main(["experiment", "--config", str(path), "--seed", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert (tmp_path / "exp.json").exists()


def test_separation_and_theorycheck_commands(tmp_path):
    cfg = tmp_path / "sep.json"
    cfg.write_text(json.dumps({"n": 60, "d": 2, "R_grid": [0.0, 30.0], "trials": 2}))
    out = tmp_path / "sep.out.json"
    assert cli.main(["separation-demo", "--config", str(cfg), "--seed", "1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert [row["R"] for row in rep["rows"]] == [0.0, 30.0]
    tc = tmp_path / "tc.json"
    tc.write_text(json.dumps({"binomial_n_max": 10, "cube_n": 8, "cube_sets": 3}))
    out = tmp_path / "tc.out.json"
    assert cli.main(["theorycheck", "--config", str(tc), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["cube_violations"] == 0
    assert rep["binomial_violations_integral_threshold"] == 0


def test_module_entry_point(dataset):
    res = subprocess.run(
        [sys.executable, "-m", "robustlab", "estimate", "--data", str(dataset), "--seed", "1"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0
    assert "mu_hat" in json.loads(res.stdout)
