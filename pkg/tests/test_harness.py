import json
import math

import numpy as np
import pytest

from robustlab.contamination import AttackSpec, CleanSampleSpec, sample_clean
from robustlab.core import RngStream, UsageError
from robustlab.harness import (
    ESTIMATORS,
    ExperimentConfig,
    SeparationConfig,
    _thread_count,
    empirical_mean,
    get_estimator,
    median_of_means,
    read_records,
    run_experiment,
    separation_demo,
    trimmed_mean,
)
from robustlab.spread_estimator import subg_estimate_pair


def test_empirical_mean_examples():
    assert np.allclose(empirical_mean(np.full((4, 2), 3.0)), [3.0, 3.0])
    assert empirical_mean([-1.0, 1.0])[0] == 0.0
    assert empirical_mean([0.0, 3.0, 6.0])[0] == pytest.approx(3.0)
    with pytest.raises(UsageError):
        empirical_mean(np.zeros((0, 1)))


def test_median_of_means_examples():
    Y = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 100.0])
    assert median_of_means(Y, 1)[0] == pytest.approx(Y.mean())
    assert median_of_means(Y, 3)[0] == pytest.approx(3.5)
    assert np.allclose(median_of_means(np.full((9, 2), -4.0), 4, RngStream(1)), -4.0)
    with pytest.raises(UsageError):
        median_of_means(Y, 7)


def test_trimmed_mean_examples():
    Y = np.array([-10.0, 1.0, 2.0, 3.0, 10.0])
    assert trimmed_mean(Y, 1e9)[0] == pytest.approx(Y.mean())
    assert trimmed_mean(Y, 3.0)[0] == pytest.approx(2.0)
    assert np.allclose(trimmed_mean(np.full((5, 3), 1.5), 0.1), 1.5)


def test_registry():
    assert set(ESTIMATORS) == {"empirical_mean", "median_of_means", "trimmed_mean", "filter", "subg"}
    with pytest.raises(UsageError):
        get_estimator("nope")
    with pytest.raises(UsageError):
        ExperimentConfig(estimators=("nope",))
    with pytest.raises(UsageError):
        ExperimentConfig(trials=0)


def test_baselines_agree_on_clean_gaussian():
    errs = {name: [] for name in ESTIMATORS}
    for t in range(8):
        r = RngStream(31).child(t)
        X = sample_clean(CleanSampleSpec("gaussian", 1000, 10), r.child(0))
        for b, name in enumerate(ESTIMATORS):
            out = get_estimator(name)(X, eps=0.05, delta=0.05, rng=r.child(1 + b))
            errs[name].append(max(np.linalg.norm(m) for _, m in out.estimates))
    med = {k: float(np.median(v)) for k, v in errs.items()}
    assert max(med.values()) <= 3 * min(med.values())


def _cfg(tmp_path, name="out.csv", **kw):
    base = dict(
        estimators=("subg", "empirical_mean"),
        sample=CleanSampleSpec("student_t", 60, 3),
        attack=AttackSpec("shift_cluster", 10.0),
        eps_grid=(0.0, 0.1),
        delta_grid=(0.05, 0.01),
        trials=3,
        seed=5,
        output=str(tmp_path / name),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_run_experiment_counts_and_determinism(tmp_path):
    cfg = _cfg(tmp_path)
    recs = run_experiment(cfg)
    assert len(recs) == cfg.trials * len(cfg.grid) * (2 + 1)
    subg = [r for r in recs if r.estimator == "subg"]
    assert sorted({r.s for r in subg}) == [-1, 1]
    assert all(r.error >= 0 for r in recs)
    again = run_experiment(_cfg(tmp_path, "again.csv"))
    a = (tmp_path / "out.csv").read_bytes()
    b = (tmp_path / "again.csv").read_bytes()
    assert a == b
    side = json.loads((tmp_path / "out.json").read_text())
    assert side["seed"] == 5 and side["records"] == len(recs)
    assert ExperimentConfig.from_json(side["config"]) == cfg
    back = read_records(str(tmp_path / "out.csv"))
    assert [(r.estimator, r.s, r.error) for r in back] == [(r.estimator, r.s, r.error) for r in again]


def test_run_experiment_threads_match_serial(tmp_path):
    serial = run_experiment(_cfg(tmp_path, "s.csv", trials=2))
    parallel = run_experiment(_cfg(tmp_path, "p.csv", trials=2), threads=2)
    assert (tmp_path / "s.csv").read_bytes() == (tmp_path / "p.csv").read_bytes()
    assert len(serial) == len(parallel)


def test_single_trial_reproduces_subg(tmp_path):
    cfg = ExperimentConfig(
        estimators=("subg",),
        sample=CleanSampleSpec("gaussian", 50, 2),
        delta_grid=(0.05,),
        trials=1,
        seed=11,
    )
    recs = run_experiment(cfg)
    root = RngStream(11).child(0)
    X = sample_clean(cfg.sample, root.child(0))
    plus, minus = subg_estimate_pair(X, 0.05, root.child(2).child(0))
    assert recs[0].error == pytest.approx(np.linalg.norm(plus.mu_hat))
    assert recs[1].error == pytest.approx(np.linalg.norm(minus.mu_hat))
    assert recs[0].sigma_v == pytest.approx(plus.sigma_v)


def test_thread_env_override(monkeypatch):
    monkeypatch.setenv("ROBUSTLAB_THREADS", "3")
    assert _thread_count(1) == 3
    monkeypatch.setenv("ROBUSTLAB_THREADS", "x")
    with pytest.raises(UsageError):
        _thread_count(1)
    monkeypatch.delenv("ROBUSTLAB_THREADS")
    assert _thread_count(2) == 2


def test_unknown_config_key():
    with pytest.raises(UsageError):
        ExperimentConfig.from_json({"trails": 3})


def test_unwritable_output(tmp_path):
    cfg = _cfg(tmp_path, trials=1, estimators=("empirical_mean",), output=str(tmp_path / "missing" / "x.csv"))
    with pytest.raises(OSError, match="missing"):
        run_experiment(cfg)


def test_separation_small():
    cfg = SeparationConfig(n=100, d=2, eps=0.1, R_grid=(0.0, 100.0), trials=6, seed=2)
    rep = separation_demo(cfg)
    zero, big = rep.rows
    # R = 0: the perturbation is of the order of the statistical error
    assert np.all(zero.subg_error_max <= 10 * (math.sqrt(2 / 100) + math.sqrt(cfg.eps)))
    # large R: the perturbed estimate moves by order eps R, the centre does not
    assert np.all(big.subg_error_max >= 0.1 * cfg.eps * 100.0)
    assert np.all(big.center_error <= 1.0)
    assert rep.stable_ok
    assert rep.clean_successes == rep.stable_fractions.size
