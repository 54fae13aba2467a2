"""Exact small-scale oracles: Hamming blow-ups on the cube, binomial
anticoncentration, and failure-rate decay of robust estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .core import RngStream, UsageError

MAX_CUBE_BITS = 20


@dataclass(frozen=True)
class CubeSet:
    """A subset of ``{0,1}^n`` as a bitset of length ``2^n`` under the product
    measure with ``P(x_b = 1) = p``. Point ``x`` has bit ``b`` as coordinate
    ``b``."""

    n: int
    indicator: np.ndarray
    p: float = 0.5

    def __post_init__(self):
        if not (1 <= self.n <= MAX_CUBE_BITS):
            raise UsageError(f"cube dimension must be in [1, {MAX_CUBE_BITS}], got {self.n}")
        if not (0.0 < self.p < 1.0):
            raise UsageError("p must lie in (0, 1)")
        ind = np.ascontiguousarray(self.indicator, dtype=np.uint8).reshape(-1)
        if ind.size != 1 << self.n:
            raise UsageError(f"indicator must have length 2^{self.n}")
        ind = (ind != 0).astype(np.uint8)
        ind.setflags(write=False)
        object.__setattr__(self, "indicator", ind)

    @classmethod
    def from_points(cls, n: int, points, p: float = 0.5) -> "CubeSet":
        ind = np.zeros(1 << n, dtype=np.uint8)
        ind[np.asarray(list(points), dtype=np.int64)] = 1
        return cls(n, ind, p)

    @classmethod
    def full(cls, n: int, p: float = 0.5) -> "CubeSet":
        return cls(n, np.ones(1 << n, dtype=np.uint8), p)

    @classmethod
    def random_with_mass(cls, n: int, rng: RngStream, p: float = 0.5, target: float = 0.9) -> "CubeSet":
        """Add uniformly random points one at a time until the measure reaches
        ``target``."""
        size = 1 << n
        ind = np.zeros(size, dtype=np.uint8)
        weights = _point_masses(n, p)
        order = rng.permutation(size)
        cum = np.cumsum(weights[order])
        stop = int(np.searchsorted(cum, target - 1e-15)) + 1
        ind[order[: min(stop, size)]] = 1
        return cls(n, ind, p)

    @property
    def mass(self) -> float:
        return float(kernels.cube_mass(self.indicator, self.n, self.p))

    def __len__(self):
        return int(self.indicator.sum())


def _point_masses(n, p):
    x = np.arange(1 << n, dtype=np.int64)
    ones = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        ones += (x >> b) & 1
    return p**ones * (1.0 - p) ** (n - ones)


def dilate(S: CubeSet, radius: int) -> CubeSet:
    """All points within Hamming distance ``radius`` of ``S``."""
    ind = S.indicator
    for _ in range(radius):
        nxt = kernels.dilate_once(ind, S.n)
        if np.array_equal(nxt, ind):
            break
        ind = nxt
    return CubeSet(S.n, ind, S.p)


@dataclass(frozen=True)
class BlowupReport:
    mass_S: float
    mass_S_eps: float
    radius: int
    bound: float
    holds: bool


def hamming_blowup_exact(S: CubeSet, eps: float) -> BlowupReport:
    """Exact measure of the ``floor(eps n)``-neighbourhood of ``S``.

    The claim checked is: if ``mass(S) >= 0.9`` then the neighbourhood has
    measure at least ``1 - 2 exp(-eps^2 n)``; smaller sets hold vacuously.
    """
    if not isinstance(S, CubeSet):
        raise UsageError("S must be a CubeSet")
    if len(S) == 0:
        raise UsageError("S must be nonempty")
    if eps < 0:
        raise UsageError("eps must be >= 0")
    radius = int(math.floor(eps * S.n + 1e-9))
    mS = S.mass
    mE = dilate(S, radius).mass
    bound = 1.0 - 2.0 * math.exp(-(eps**2) * S.n)
    return BlowupReport(mS, mE, radius, bound, bool(mS < 0.9 or mE >= bound - 1e-12))


def _exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    # decimal string of the float: 0.1 means one tenth, not its binary neighbour
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class AnticoncentrationReport:
    n: int
    p: float
    eps: float
    threshold: int
    exact_tail: float
    bound: float
    holds: bool
    integral_threshold: bool


def binomial_anticoncentration_check(n: int, p, eps) -> AnticoncentrationReport:
    """Compare ``P(S / n >= p + eps)`` for ``S ~ Bin(n, p)`` with
    ``exp(-n eps^2 / (p (1 - p))) / sqrt(2 n)``.

    The tail is summed exactly in rational arithmetic from
    ``k = ceil(n (p + eps))``; ``p`` and ``eps`` given as floats are read as
    their shortest decimal form. ``integral_threshold`` records whether
    ``n (p + eps)`` is an integer.
    """
    if not (1 <= n <= 1000):
        raise UsageError("n must lie in [1, 1000]")
    P, E = _exact(p), _exact(eps)
    if not (0 < P < 1):
        raise UsageError("p must lie in (0, 1)")
    if E < 0 or P + E > 1:
        raise UsageError("need eps >= 0 and p + eps <= 1")
    t = n * (P + E)
    k0 = math.ceil(t)
    Q = 1 - P
    tail = sum((math.comb(n, k) * P**k * Q ** (n - k) for k in range(k0, n + 1)), Fraction(0))
    bound = math.exp(-n * float(E) ** 2 / (float(P) * float(Q))) / math.sqrt(2.0 * n)
    exact_tail = float(tail)
    return AnticoncentrationReport(
        n, float(P), float(E), k0, exact_tail, bound, bool(exact_tail >= bound), t.denominator == 1
    )


def binomial_sweep(n_max: int = 50, p_steps: int = 10, eps_steps: int = 20):
    """Every ``n <= n_max``, ``p = k / p_steps`` and ``eps = j / eps_steps``
    with ``p + eps <= 1``; returns the list of reports."""
    out = []
    for n in range(1, n_max + 1):
        for k in range(1, p_steps):
            P = Fraction(k, p_steps)
            j = 0
            while P + Fraction(j, eps_steps) <= 1:
                out.append(binomial_anticoncentration_check(n, P, Fraction(j, eps_steps)))
                j += 1
    return out


# --- failure-rate decay ---------------------------------------------------------


@dataclass(frozen=True)
class FailureTable:
    estimator: str
    n_grid: tuple
    trials: int
    failures: tuple
    envelope_C: float
    slope: float
    ci_low: float
    ci_high: float

    @property
    def rates(self) -> tuple:
        return tuple(f / self.trials for f in self.failures)

    def rows(self):
        return list(zip(self.n_grid, self.failures, self.rates))


def _log_rate(f, T):
    # continuity-corrected so zero-failure cells stay finite
    return np.log((f + 0.5) / (T + 1.0))


def _slope(ns, f, T):
    y = _log_rate(np.asarray(f, dtype=np.float64), T)
    x = np.asarray(ns, dtype=np.float64)
    x = x - x.mean()
    return float((x * (y - y.mean())).sum() / (x * x).sum())


def high_prob_from_robust(
    estimator: str,
    spec,
    eps: float,
    n_grid,
    trials: int,
    envelope_C: float = 1.0,
    rng: RngStream | None = None,
    bootstrap: int = 2000,
) -> FailureTable:
    """Failure frequency of ``estimator`` on clean samples as ``n`` grows.

    A trial fails when ``||mu_hat - mu|| > C (sqrt(Tr(Sigma) / n) + sqrt(||Sigma|| eps))``.
    The log failure rate (continuity corrected) is fitted against ``n`` by
    least squares; the confidence interval comes from a parametric bootstrap
    of the per-``n`` failure counts.
    """
    from .contamination import sample_clean
    from .harness import get_estimator

    est = get_estimator(estimator)
    if trials < 1:
        raise UsageError("trials must be >= 1")
    n_grid = tuple(int(n) for n in n_grid)
    if len(n_grid) < 2:
        raise UsageError("need at least two sample sizes")
    rng = rng or RngStream(0)
    Sigma = spec.sigma
    T = float(np.trace(Sigma))
    S = float(np.linalg.eigvalsh(Sigma)[-1])
    mu = spec.mu
    fails = []
    for a, n in enumerate(n_grid):
        radius = envelope_C * (math.sqrt(T / n) + math.sqrt(S * eps))
        f = 0
        for t in range(trials):
            r = rng.child(a).child(t)
            X = sample_clean(spec.with_n(n), r.child(0))
            out = est(X, eps=eps, delta=None, rng=r.child(1))
            err = max(float(np.linalg.norm(m - mu)) for _, m in out.estimates)
            f += err > radius
        fails.append(f)
    slope = _slope(n_grid, fails, trials)
    g = rng.child(len(n_grid)).generator
    p_hat = np.asarray(fails, dtype=np.float64) / trials
    boots = np.array([_slope(n_grid, g.binomial(trials, p_hat), trials) for _ in range(bootstrap)])
    lo, hi = np.quantile(boots, [0.025, 0.975])
    return FailureTable(estimator, n_grid, trials, tuple(fails), float(envelope_C), slope, float(lo), float(hi))
