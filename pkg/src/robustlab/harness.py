"""Baseline estimators, the estimator registry, experiment orchestration and
the separation demonstration."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .contamination import AttackSpec, CleanSampleSpec, corrupt, sample_clean
from .core import RngStream, UsageError, as_dataset
from .spread_estimator import eps_for, subg_core, _assemble
from .stability import extract_stable_set, solve_rob_sdp

# --- baselines --------------------------------------------------------------------


def empirical_mean(X) -> np.ndarray:
    X = as_dataset(X)
    return X.points.mean(axis=0)


def median_of_means(X, k: int, rng: RngStream | None = None) -> np.ndarray:
    """Coordinate-wise median of ``k`` block means.

    The first ``k * floor(n / k)`` indices of a permutation (the identity
    when ``rng`` is omitted) are split into ``k`` consecutive blocks.
    """
    X = as_dataset(X)
    if not (1 <= k <= X.n):
        raise UsageError(f"need 1 <= k <= n, got k={k}, n={X.n}")
    idx = np.arange(X.n) if rng is None else rng.permutation(X.n)
    m = X.n // k
    blocks = X.points[idx[: k * m]].reshape(k, m, X.d).mean(axis=1)
    return np.median(blocks, axis=0)


def trimmed_mean(X, tau: float) -> np.ndarray:
    """Coordinate-wise median plus the mean of deviations clipped at ``tau``."""
    X = as_dataset(X)
    if not tau >= 0:
        raise UsageError("tau must be >= 0")
    med = np.median(X.points, axis=0)
    return med + np.clip(X.points - med, -tau, tau).mean(axis=0)


# --- registry ---------------------------------------------------------------------


@dataclass
class EstimatorOutput:
    estimates: list  # [(s, mu_hat)], s = 0 when the estimator has no version bit
    sigma_v: float = float("nan")
    objective: float = float("nan")
    stable_size: int = -1


def _rho(X, eps, delta):
    if delta is not None:
        return eps_for(X.n, delta)
    if eps is None:
        raise UsageError("estimator needs eps or delta")
    return eps


def _blocks_for(n, delta):
    return max(1, min(n, math.ceil(8.0 * math.log(1.0 / delta)))) if delta is not None else max(1, min(n, 8))


def _est_empirical(X, eps=None, delta=None, rng=None):
    return EstimatorOutput([(0, empirical_mean(X))])


def _est_mom(X, eps=None, delta=None, rng=None):
    return EstimatorOutput([(0, median_of_means(X, _blocks_for(X.n, delta), rng))])


def _est_trimmed(X, eps=None, delta=None, rng=None):
    # clip at a multiple of the largest robust scale; grows with log(1/delta)
    P = X.points
    med = np.median(P, axis=0)
    scale = 1.4826 * float(np.max(np.median(np.abs(P - med), axis=0)))
    level = math.log(2.0 / delta) if delta is not None else math.log(2.0 / max(eps or 0.05, 1e-12))
    return EstimatorOutput([(0, trimmed_mean(X, scale * math.sqrt(2.0 * level)))])


def _stable_size(sol):
    return extract_stable_set(sol, sol.rho, c1=4.0).size


def _est_filter(X, eps=None, delta=None, rng=None):
    sol = solve_rob_sdp(X, _rho(X, eps, delta), rng=(rng or RngStream(0)).child(0))
    return EstimatorOutput([(0, sol.center)], objective=sol.objective, stable_size=_stable_size(sol))


def _est_subg(X, eps=None, delta=None, rng=None):
    if delta is None:
        raise UsageError("subg needs delta")
    core = subg_core(X, delta, rng)
    plus, minus = _assemble(*core, 1), _assemble(*core, -1)
    sol = core[1]
    return EstimatorOutput(
        [(1, plus.mu_hat), (-1, minus.mu_hat)],
        sigma_v=plus.sigma_v,
        objective=sol.objective,
        stable_size=_stable_size(sol),
    )


ESTIMATORS = {
    "empirical_mean": _est_empirical,
    "median_of_means": _est_mom,
    "trimmed_mean": _est_trimmed,
    "filter": _est_filter,
    "subg": _est_subg,
}


def get_estimator(name: str):
    try:
        return ESTIMATORS[name]
    except KeyError:
        raise UsageError(f"unknown estimator {name!r}; registered: {sorted(ESTIMATORS)}") from None


# --- experiments ------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: every estimator on every ``(eps, delta)`` cell of the
    grid, ``trials`` times. ``eps_grid`` is the contamination level (also the
    trimming level of ``filter`` when ``delta`` is ``None``)."""

    estimators: tuple = ("subg",)
    sample: CleanSampleSpec = field(default_factory=CleanSampleSpec)
    attack: AttackSpec | None = None
    eps_grid: tuple = (0.0,)
    delta_grid: tuple = (0.05,)
    trials: int = 1
    seed: int = 0
    output: str | None = None
    envelope_C: float = 10.0

    def __post_init__(self):
        if not self.estimators:
            raise UsageError("estimators must be nonempty")
        for e in self.estimators:
            get_estimator(e)
        if not self.eps_grid or not self.delta_grid:
            raise UsageError("grids must be nonempty")
        if self.trials < 1:
            raise UsageError("trials must be >= 1")

    @property
    def grid(self):
        return [(float(e), None if d is None else float(d)) for e in self.eps_grid for d in self.delta_grid]

    def to_json(self) -> dict:
        out = asdict(self)
        out["estimators"] = list(self.estimators)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise UsageError(f"unknown config keys: {sorted(extra)}")
        if "sample" in obj:
            obj["sample"] = _spec_from(obj["sample"], CleanSampleSpec)
        if obj.get("attack") is not None:
            obj["attack"] = _spec_from(obj["attack"], AttackSpec)
        for key in ("estimators", "eps_grid", "delta_grid"):
            if key in obj:
                obj[key] = tuple(obj[key])
        return cls(**obj)


def _spec_from(obj, cls):
    if isinstance(obj, cls):
        return obj
    obj = dict(obj)
    for key in ("mean", "v"):
        if obj.get(key) is not None:
            obj[key] = tuple(obj[key])
    if obj.get("cov") is not None:
        obj["cov"] = tuple(tuple(r) for r in obj["cov"])
    try:
        return cls(**obj)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


@dataclass(frozen=True)
class TrialRecord:
    estimator: str
    trial: int
    n: int
    d: int
    eps: float
    delta: float
    s: int
    error: float
    sigma_v: float
    objective: float
    stable_size: int
    seed: int
    wall_time: float = 0.0


RECORD_FIELDS = [f.name for f in fields(TrialRecord)]


def _run_trial(cfg: ExperimentConfig, trial: int):
    root = RngStream(cfg.seed).child(trial)
    X = sample_clean(cfg.sample, root.child(0))
    mu = cfg.sample.mu
    records = []
    for a, (eps, delta) in enumerate(cfg.grid):
        data = X
        if cfg.attack is not None and eps > 0:
            data = corrupt(X, eps, cfg.attack, root.child(1)).data
        for b, name in enumerate(cfg.estimators):
            t0 = time.perf_counter()
            out = get_estimator(name)(data, eps=eps if eps > 0 else None, delta=delta, rng=root.child(2 + a).child(b))
            wall = time.perf_counter() - t0
            for s, m in out.estimates:
                records.append(
                    TrialRecord(
                        name,
                        trial,
                        data.n,
                        data.d,
                        eps,
                        float("nan") if delta is None else delta,
                        int(s),
                        float(np.linalg.norm(m - mu)),
                        float(out.sigma_v),
                        float(out.objective),
                        int(out.stable_size),
                        int(cfg.seed),
                        wall,
                    )
                )
    return records


def _thread_count(threads):
    env = os.environ.get("ROBUSTLAB_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise UsageError(f"ROBUSTLAB_THREADS must be an integer, got {env!r}") from None
    return max(1, int(threads or 1))


def run_experiment(cfg: ExperimentConfig, threads: int = 1, include_timing: bool = False) -> list:
    """Run every trial and return the records; write CSV plus a JSON sidecar
    when ``cfg.output`` is set.

    Records are ordered by trial, then grid cell, then estimator, so the
    output does not depend on ``threads``. Wall times are left out of the CSV
    unless ``include_timing`` is set, keeping files byte-identical across
    runs with the same seed.
    """
    n_threads = _thread_count(threads)
    if n_threads > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=n_threads) as pool:
            chunks = list(pool.map(_run_trial, [cfg] * cfg.trials, range(cfg.trials)))
    else:
        chunks = [_run_trial(cfg, t) for t in range(cfg.trials)]
    records = [r for chunk in chunks for r in chunk]
    if cfg.output:
        write_records(records, cfg.output, include_timing)
        sidecar = _sidecar_path(cfg.output)
        try:
            with open(sidecar, "w", encoding="utf-8") as fh:
                json.dump({"config": cfg.to_json(), "seed": cfg.seed, "records": len(records)}, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"cannot write {sidecar}: {exc}") from exc
    return records


def _sidecar_path(path):
    root, _ = os.path.splitext(path)
    return root + ".json"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, include_timing: bool = False) -> str:
    cols = RECORD_FIELDS if include_timing else [c for c in RECORD_FIELDS if c != "wall_time"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def write_records(records, path: str, include_timing: bool = False):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(records_to_csv(records, include_timing))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_records(path: str) -> list:
    conv = {f.name: f.type for f in fields(TrialRecord)}
    out = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                kw = {}
                for k, v in row.items():
                    typ = conv[k]
                    kw[k] = v if typ == "str" else (int(v) if typ == "int" else float(v))
                out.append(TrialRecord(**kw))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    return out


# --- separation demonstration -----------------------------------------------------


@dataclass(frozen=True)
class SeparationConfig:
    """Symmetric-spread attack along ``e_1`` on standard Gaussian data.

    ``delta`` defaults to ``exp(-eps n)``, so the estimator's trimming level
    ``log(4 / delta) / n`` just exceeds the contamination level.
    """

    n: int = 200
    d: int = 5
    eps: float = 0.1
    R_grid: tuple = (0.0, 10.0, 50.0)
    trials: int = 100
    seed: int = 0
    delta: float | None = None
    c1: float = 1.0
    ratio_target: float = 5.0
    envelope_C: float = 10.0

    @property
    def delta_used(self) -> float:
        return math.exp(-self.eps * self.n) if self.delta is None else self.delta


@dataclass(frozen=True)
class SeparationRow:
    R: float
    subg_error_max: np.ndarray
    center_error: np.ndarray
    ratio_target: float

    @property
    def ratios(self) -> np.ndarray:
        return self.subg_error_max / np.maximum(self.center_error, 1e-300)

    @property
    def success_fraction(self) -> float:
        return float(np.mean(self.ratios >= self.ratio_target))


@dataclass(frozen=True)
class SeparationReport:
    rows: tuple
    stable_fractions: np.ndarray  # |I| / n on clean-sample successes
    stable_bound: float  # 1 - c1 eps / 2
    stable_constants: np.ndarray  # spectral norm * eps / eta^2
    clean_successes: int
    trials: int

    @property
    def stable_ok(self) -> bool:
        return bool(np.all(self.stable_fractions >= self.stable_bound - 1e-12))


def separation_demo(cfg: SeparationConfig) -> SeparationReport:
    """Error of the perturbed estimate against the robust centre under the
    symmetric-spread attack, plus stable-set statistics on clean samples.

    A clean run is a success when the centre lands within
    ``envelope_C (sqrt(d / n) + sqrt(log(1 / delta) / n))`` of the truth; on
    those runs the weights are re-optimised about the centre over
    ``W_{c1 eps / 4}`` and the stable set is extracted.
    """
    delta = cfg.delta_used
    spec = CleanSampleSpec("gaussian", cfg.n, cfg.d)
    rows = []
    fracs, consts = [], []
    successes = 0
    root = RngStream(cfg.seed)
    eta = math.sqrt(cfg.d / cfg.n) + math.sqrt(cfg.eps)
    radius = cfg.envelope_C * (math.sqrt(cfg.d / cfg.n) + math.sqrt(math.log(1.0 / delta) / cfg.n))
    rho_stable = cfg.c1 * cfg.eps / 4.0
    for a, R in enumerate(cfg.R_grid):
        sub, cen = [], []
        for t in range(cfg.trials):
            r = root.child(t)
            X = sample_clean(spec, r.child(0))
            Xc = corrupt(X, cfg.eps, AttackSpec("symmetric_spread", R), r.child(1)).data
            eps_alg, sol, v, sigma = subg_core(Xc, delta, r.child(2 + a))
            plus, minus = _assemble(eps_alg, sol, v, sigma, 1), _assemble(eps_alg, sol, v, sigma, -1)
            sub.append(max(np.linalg.norm(plus.mu_hat), np.linalg.norm(minus.mu_hat)))
            cen.append(np.linalg.norm(sol.center))
        rows.append(SeparationRow(float(R), np.array(sub), np.array(cen), cfg.ratio_target))
    for t in range(cfg.trials):
        r = root.child(t)
        X = sample_clean(spec, r.child(0))
        _, sol, _, _ = subg_core(X, delta, r.child(2 + len(cfg.R_grid)))
        if np.linalg.norm(sol.center) > radius:
            continue
        successes += 1
        fixed = solve_rob_sdp(X, rho_stable, center=sol.center, rng=r.child(3 + len(cfg.R_grid)))
        st = extract_stable_set(fixed, cfg.eps, cfg.c1, X)
        fracs.append(st.size / cfg.n)
        consts.append(st.spectral_norm * cfg.eps / eta**2)
    return SeparationReport(
        tuple(rows), np.array(fracs), 1.0 - cfg.c1 * cfg.eps / 2.0, np.array(consts), successes, cfg.trials
    )
