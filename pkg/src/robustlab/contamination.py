"""Clean heavy-tailed samplers, inspecting adversaries and the truncation /
tail-decay checks used to calibrate the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, RngStream, UsageError, as_dataset
from .spread_estimator import spread

FAMILIES = ("gaussian", "student_t", "pareto", "point_mass_mixture")


def _sqrt_psd(S):
    vals, vecs = np.linalg.eigh(S)
    if vals[0] < -1e-10 * max(1.0, abs(vals[-1])):
        raise UsageError("covariance must be positive semidefinite")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


@dataclass(frozen=True)
class CleanSampleSpec:
    """An i.i.d. sampling model with population mean ``mean`` and covariance
    ``cov`` (identity when omitted).

    ``student_t`` uses ``df`` (> 2) and ``pareto`` uses ``shape`` (> 2) and
    ``scale``; both are standardised to zero mean and unit variance per
    coordinate before the affine map. ``point_mass_mixture`` draws each
    coordinate as ``L * Rademacher * Bernoulli(p)`` (variance ``p L^2``) and is
    only shifted and mixed by ``cov^{1/2}``, not standardised, so ``p = 0``
    gives a point mass at ``mean``.
    """

    family: str = "gaussian"
    n: int = 100
    d: int = 1
    mean: tuple | None = None
    cov: tuple | None = None
    df: float = 3.0
    shape: float = 2.5
    scale: float = 1.0
    p: float = 0.5
    L: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 1 or self.d < 1:
            raise UsageError("n and d must be >= 1")
        if self.family == "student_t" and not self.df > 2:
            raise UsageError("student_t needs df > 2 for a finite covariance")
        if self.family == "pareto" and not (self.shape > 2 and self.scale > 0):
            raise UsageError("pareto needs shape > 2 and scale > 0")
        if self.family == "point_mass_mixture" and not (0.0 <= self.p <= 1.0):
            raise UsageError("point_mass_mixture needs p in [0, 1]")
        if self.mean is not None and len(self.mean) != self.d:
            raise UsageError("mean has the wrong dimension")
        if self.cov is not None and np.asarray(self.cov).shape != (self.d, self.d):
            raise UsageError("cov must be d x d")

    @property
    def mu(self) -> np.ndarray:
        return np.zeros(self.d) if self.mean is None else np.asarray(self.mean, dtype=np.float64)

    @property
    def sigma(self) -> np.ndarray:
        """Population covariance of the generated points."""
        base = np.eye(self.d) if self.cov is None else np.asarray(self.cov, dtype=np.float64)
        if self.family == "point_mass_mixture":
            return self.p * self.L**2 * base
        return base

    def with_n(self, n: int) -> "CleanSampleSpec":
        return CleanSampleSpec(**{**self.__dict__, "n": int(n)})


def _standard_draws(spec: CleanSampleSpec, g: np.random.Generator):
    shape = (spec.n, spec.d)
    if spec.family == "gaussian":
        return g.standard_normal(shape)
    if spec.family == "student_t":
        return g.standard_t(spec.df, size=shape) / math.sqrt(spec.df / (spec.df - 2.0))
    if spec.family == "pareto":
        a, xm = spec.shape, spec.scale
        # numpy draws the Lomax form; shifting by one gives classical Pareto(a, 1)
        x = (g.pareto(a, size=shape) + 1.0) * xm
        mean = a * xm / (a - 1.0)
        sd = xm * math.sqrt(a / (a - 2.0)) / (a - 1.0)
        return (x - mean) / sd
    signs = g.choice(np.array([-1.0, 1.0]), size=shape)
    keep = g.random(shape) < spec.p
    return spec.L * signs * keep


def sample_clean(spec: CleanSampleSpec, rng: RngStream) -> Dataset:
    """Draw ``spec.n`` i.i.d. points."""
    z = _standard_draws(spec, rng.generator)
    if spec.cov is not None:
        z = z @ _sqrt_psd(np.asarray(spec.cov, dtype=np.float64)).T
    return Dataset(z + spec.mu)


ATTACKS = ("shift_cluster", "symmetric_spread", "sign_flip_scale")


@dataclass(frozen=True)
class AttackSpec:
    """``shift_cluster`` and ``symmetric_spread`` use direction ``v``
    (``e_1`` when omitted); ``sign_flip_scale`` only uses ``R``."""

    kind: str
    R: float
    v: tuple | None = None

    def __post_init__(self):
        if self.kind not in ATTACKS:
            raise UsageError(f"unknown attack {self.kind!r}; choose from {ATTACKS}")
        if not math.isfinite(self.R):
            raise UsageError("R must be finite")

    def direction(self, d: int) -> np.ndarray:
        if self.v is None:
            v = np.zeros(d)
            v[0] = 1.0
            return v
        v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        if v.shape[0] != d:
            raise UsageError("attack direction has the wrong dimension")
        nv = np.linalg.norm(v)
        if nv == 0:
            raise UsageError("attack direction must be nonzero")
        return v / nv


@dataclass(frozen=True)
class CorruptedSample:
    data: Dataset
    corrupted: tuple
    attack: AttackSpec | None
    eps: float
    clean_mean: np.ndarray = field(default=None, repr=False, compare=False)


def corruption_count(n: int, eps: float) -> int:
    """``ceil(eps n)``, guarding against round-off just above an integer."""
    return min(n, int(math.ceil(eps * n - 1e-9)))


def corrupt(X, eps: float, attack: AttackSpec, rng: RngStream | None = None) -> CorruptedSample:
    """Replace ``ceil(eps n)`` rows of ``X`` according to ``attack``.

    The adversary sees the whole sample and its empirical mean ``mu``.
    ``shift_cluster`` moves the rows closest to ``mu`` to ``mu + R v``;
    ``symmetric_spread`` moves the same rows to ``mu + R v`` and ``mu - R v``
    in alternation (an odd count puts the extra row at ``+``);
    ``sign_flip_scale`` maps the rows farthest from ``mu`` to
    ``mu - R (x - mu)``. Ties in distance are broken by row index. ``rng`` is
    accepted for interface symmetry; the attacks are deterministic.
    """
    X = as_dataset(X)
    if not (0.0 <= eps < 0.5):
        raise UsageError(f"eps must lie in [0, 1/2), got {eps}")
    P = np.array(X.points, copy=True)
    mu = P.mean(axis=0)
    k = corruption_count(X.n, eps)
    if k == 0:
        return CorruptedSample(X, (), attack, float(eps), mu)
    dist = np.linalg.norm(P - mu, axis=1)
    if attack.kind == "sign_flip_scale":
        idx = np.argsort(-dist, kind="stable")[:k]
        P[idx] = mu - attack.R * (P[idx] - mu)
    else:
        v = attack.direction(X.d)
        idx = np.argsort(dist, kind="stable")[:k]
        if attack.kind == "shift_cluster":
            P[idx] = mu + attack.R * v
        else:
            signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
            P[idx] = mu + attack.R * signs[:, None] * v
    return CorruptedSample(Dataset(P), tuple(sorted(int(i) for i in idx)), attack, float(eps), mu)


# --- truncation and tail decay -------------------------------------------------


def truncate(values, tau: float) -> np.ndarray:
    """Clip each value to ``[-tau, tau]``."""
    if not tau >= 0:
        raise UsageError("tau must be >= 0")
    return np.clip(np.asarray(values, dtype=np.float64), -tau, tau)


def _level_scale(eps, trace_over_n, op_norm=1.0):
    return max(math.sqrt(trace_over_n) / eps, math.sqrt(op_norm / eps))


def truncation_level(eps: float, trace_over_n: float, C1: float = 64.0, op_norm: float = 1.0) -> float:
    """``C1 * max(sqrt(Tr / n) / eps, sqrt(||Sigma|| / eps))``."""
    if not (0.0 < eps < 0.5):
        raise UsageError(f"eps must lie in (0, 1/2), got {eps}")
    return C1 * _level_scale(eps, trace_over_n, op_norm)


@dataclass(frozen=True)
class TailLadder:
    eps: float
    n: int
    C1: float
    tau: float
    levels: tuple  # (j, tau_j, allowed count)

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([t for _, t, _ in self.levels])

    @property
    def allowed(self) -> np.ndarray:
        return np.array([a for _, _, a in self.levels])


def tail_ladder(eps: float, trace_over_n: float, n: int, C1: float = 64.0, j_max: int | None = None) -> TailLadder:
    """Thresholds ``tau_j = (C1 / 64) e^{4j} max(sqrt(Tr/n) / eps, 1 / sqrt(eps))``
    with exceedance allowances ``2 (n eps + j) / (3 j)`` for ``j = 1..j_max``
    (``ceil(n eps)`` by default). Assumes ``||Sigma|| = 1``."""
    if not (0.0 < eps < 0.5):
        raise UsageError(f"eps must lie in (0, 1/2), got {eps}")
    if n < 1:
        raise UsageError("n must be >= 1")
    j_max = corruption_count(n, eps) if j_max is None else int(j_max)
    if j_max < 1:
        raise UsageError("j_max must be >= 1")
    base = _level_scale(eps, trace_over_n)
    levels = tuple(
        (j, (C1 / 64.0) * math.exp(4.0 * j) * base, 2.0 * (n * eps + j) / (3.0 * j)) for j in range(1, j_max + 1)
    )
    return TailLadder(float(eps), int(n), float(C1), C1 * base, levels)


@dataclass(frozen=True)
class TailDecayReport:
    counts: np.ndarray  # (directions, levels)
    allowed: np.ndarray
    violations: tuple  # (direction index, j)

    @property
    def passes(self) -> bool:
        return not self.violations


def _directions(D, d):
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    if D.shape[1] != d:
        raise UsageError("direction dimension does not match the data")
    norms = np.linalg.norm(D, axis=1)
    if np.any(norms == 0):
        raise UsageError("directions must be nonzero")
    return D / norms[:, None]


def check_tail_decay(X, directions, ladder: TailLadder, center=None) -> TailDecayReport:
    """Count ``|<x_i - center, v>| >= tau_j`` for every direction and level and
    compare with the ladder's allowances (``center`` defaults to 0)."""
    X = as_dataset(X)
    D = _directions(directions, X.d)
    Z = X.points if center is None else X.points - np.asarray(center, dtype=np.float64)
    A = np.abs(Z @ D.T)  # (n, k)
    th = ladder.thresholds
    counts = (A[:, :, None] >= th[None, None, :]).sum(axis=0)
    allowed = ladder.allowed
    bad = np.argwhere(counts > allowed[None, :])
    viol = tuple((int(i), int(ladder.levels[j][0])) for i, j in bad)
    return TailDecayReport(counts, allowed, viol)


def standard_directions(d: int, k: int, rng: RngStream) -> np.ndarray:
    """``k`` random unit vectors followed by the ``d`` coordinate axes."""
    return np.vstack([rng.unit_vectors(k, d), np.eye(d)])


@dataclass(frozen=True)
class TruncatedLemmaReport:
    tau: float
    second_moment_ratio: float
    mean_ratio: float
    spread_ratio: float
    ceiling: float

    @property
    def ratios(self) -> tuple:
        return (self.second_moment_ratio, self.mean_ratio, self.spread_ratio)

    @property
    def passes(self) -> bool:
        return max(self.ratios) <= self.ceiling


def check_truncated_lemmas(
    X,
    eps: float,
    directions,
    C1: float = 64.0,
    mu=None,
    cov=None,
    ceiling: float = 30.0,
) -> TruncatedLemmaReport:
    """Empirical constants for the truncated second moment, the truncated
    mean and the spread of clean data, each maximised over ``directions``.

    With ``Y_i = X_i - mu``, ``T = Tr(cov)`` and ``S = ||cov||``:

    * ``sum phi(<Y_i, v>)^2 / (T / eps + n S)``
    * ``|sum phi(<Y_i, v>)| / (sqrt(n T) + n sqrt(eps))``
    * ``spread(<Y_i, v>, 0; m = n eps) / (sqrt(T / (eps n)) + sqrt(S))``

    where ``phi`` clips at ``tau = C1 max(sqrt(T/n) / eps, sqrt(S / eps))``.
    ``mu`` and ``cov`` default to zero and the identity.
    """
    X = as_dataset(X)
    n, d = X.n, X.d
    if not (0.0 < eps < 0.5):
        raise UsageError(f"eps must lie in (0, 1/2), got {eps}")
    mu = np.zeros(d) if mu is None else np.asarray(mu, dtype=np.float64)
    cov = np.eye(d) if cov is None else np.asarray(cov, dtype=np.float64)
    T = float(np.trace(cov))
    S = float(np.linalg.eigvalsh(cov)[-1])
    tau = truncation_level(eps, T / n, C1, S)
    D = _directions(directions, d)
    proj = (X.points - mu) @ D.T
    phi = truncate(proj, tau)
    r1 = float((phi**2).sum(axis=0).max()) / (T / eps + n * S)
    r2 = float(np.abs(phi.sum(axis=0)).max()) / (math.sqrt(n * T) + n * math.sqrt(eps))
    sp = max(spread(proj[:, j], 0.0, n * eps) for j in range(D.shape[0]))
    r3 = sp / (math.sqrt(T / (eps * n)) + math.sqrt(S))
    return TruncatedLemmaReport(tau, r1, r2, r3, float(ceiling))
