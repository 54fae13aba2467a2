"""The capped simplex ``W_rho``: probability vectors with every entry at most
``1 / ((1 - rho) n)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import UsageError

SUM_TOL = 1e-10
CAP_TOL = 1e-12


def _check_rho(rho):
    if not (0.0 <= rho <= 0.5):
        raise UsageError(f"rho must lie in [0, 1/2], got {rho}")


def cap_for(n: int, rho: float) -> float:
    return 1.0 / ((1.0 - rho) * n)


@dataclass(frozen=True)
class CappedWeights:
    """A point of ``W_rho``; validated and read-only after construction."""

    w: np.ndarray
    rho: float

    def __post_init__(self):
        _check_rho(self.rho)
        arr = np.array(self.w, dtype=np.float64, copy=True).reshape(-1)
        if arr.size < 1:
            raise UsageError("weights must be non-empty")
        cap = cap_for(arr.size, self.rho)
        if np.any(arr < -CAP_TOL) or np.any(arr > cap + CAP_TOL):
            raise UsageError(f"weights violate 0 <= w_i <= {cap:.6g}")
        if abs(arr.sum() - 1.0) > SUM_TOL:
            raise UsageError(f"weights sum to {arr.sum():.12g}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n(self) -> int:
        return self.w.size

    @property
    def cap(self) -> float:
        return cap_for(self.n, self.rho)

    def __len__(self):
        return self.n

    def __array__(self, dtype=None, copy=None):
        return self.w if dtype is None else self.w.astype(dtype)


def uniform_weights(n: int, rho: float = 0.0) -> CappedWeights:
    if n < 1:
        raise UsageError("n must be >= 1")
    _check_rho(rho)
    return CappedWeights(np.full(n, 1.0 / n), rho)


def capped_support(n: int, rho: float):
    """``(k, cap, resid)``: ``k`` entries at the cap plus one entry at ``resid``.

    ``(1 - rho) n`` is usually not an integer; the extreme points of
    ``W_rho`` then carry one fractional weight.
    """
    _check_rho(rho)
    cap = cap_for(n, rho)
    k = min(n, int(math.floor((1.0 - rho) * n + 1e-9)))
    resid = 1.0 - k * cap
    if resid < 1e-15 or k == n:
        resid = 0.0
    return k, cap, resid


def min_linear_over_capped_simplex(a, rho: float):
    """Exact minimiser of ``sum_i w_i a_i`` over ``W_rho``.

    Returns ``(value, CappedWeights)``. Ties are broken by original index.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    n = a.size
    if n < 1:
        raise UsageError("objective must be non-empty")
    k, cap, resid = capped_support(n, rho)
    order = np.argsort(a, kind="stable")
    w = np.zeros(n)
    w[order[:k]] = cap
    if resid > 0.0:
        w[order[k]] = resid
    # exact renormalisation guards against round-off in k * cap
    w /= w.sum()
    w = np.minimum(w, cap)
    return float(w @ a), CappedWeights(w, rho)


def min_linear_values(A, rho: float) -> np.ndarray:
    """Vectorised ``min_linear_over_capped_simplex`` values for each row of ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    k, cap, resid = capped_support(A.shape[1], rho)
    return kernels.capped_min_rows(A, k, cap, resid)


def tv_distance(w, w2) -> float:
    """``sum_i max(w_i, w2_i) - 1``."""
    a = np.asarray(w, dtype=np.float64)
    b = np.asarray(w2, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.maximum(a, b).sum() - 1.0)


def recap(w, rho: float, max_rounds: int = 200) -> np.ndarray:
    """Push a non-negative vector into ``W_rho``.

    Normalises, clips entries above the cap and hands the clipped mass to the
    uncapped coordinates in proportion to their weight. If the uncapped
    coordinates have no mass, the excess is spread evenly over them.
    """
    w = np.clip(np.asarray(w, dtype=np.float64), 0.0, None)
    n = w.size
    cap = cap_for(n, rho)
    total = w.sum()
    w = np.full(n, 1.0 / n) if total <= 0 else w / total
    for _ in range(max_rounds):
        over = w > cap
        if not np.any(over):
            break
        excess = float((w[over] - cap).sum())
        w[over] = cap
        free = w < cap
        room = np.where(free, cap - w, 0.0)
        if room.sum() <= excess * (1 + 1e-12):
            # degenerate: fill every free coordinate to the cap
            w[free] = cap
            break
        mass = np.where(free, w, 0.0)
        if mass.sum() > 0:
            w = w + excess * mass / mass.sum()
        else:
            w = w + excess * room / room.sum()
    w = np.clip(w, 0.0, cap)
    w /= w.sum()
    return np.minimum(w, cap)


@dataclass(frozen=True)
class ProximityReport:
    mu: float
    mu2: float
    sigma: float
    sigma2: float
    bound: float
    holds: bool

    @property
    def gap(self) -> float:
        return abs(self.mu - self.mu2)


def mean_proximity_bound_check(Y, w: CappedWeights, w2: CappedWeights) -> ProximityReport:
    """Check ``|mu - mu2| <= 2 sqrt(rho) (sigma + sigma2)`` for two capped weightings.

    ``rho`` is the larger of the two weightings' parameters (a member of
    ``W_r`` is a member of ``W_rho`` for ``r <= rho``) and must be at most 1/4.
    """
    rho = max(w.rho, w2.rho)
    if rho > 0.25:
        raise UsageError(f"proximity bound needs rho <= 1/4, got {rho}")
    y = np.asarray(Y, dtype=np.float64).reshape(-1)
    if y.size != w.n or y.size != w2.n:
        raise UsageError("Y and weights must have equal length")
    a, b = w.w, w2.w
    mu, mu2 = float(a @ y), float(b @ y)
    sigma = math.sqrt(max(float(a @ (y - mu) ** 2), 0.0))
    sigma2 = math.sqrt(max(float(b @ (y - mu2) ** 2), 0.0))
    bound = 2.0 * math.sqrt(rho) * (sigma + sigma2)
    return ProximityReport(mu, mu2, sigma, sigma2, bound, abs(mu - mu2) <= bound + 1e-9)


def random_capped_weights(n: int, rho: float, rng, kind: str = "mixed") -> CappedWeights:
    """Random member of ``W_rho`` for property tests and sweeps.

    ``kind`` is ``"dirichlet"`` (recapped Dirichlet draw), ``"vertex"`` (a
    random extreme point) or ``"mixed"`` (either, with equal probability).
    """
    if kind == "mixed":
        kind = "vertex" if rng.uniform() < 0.5 else "dirichlet"
    if kind == "vertex":
        k, cap, resid = capped_support(n, rho)
        order = rng.permutation(n)
        w = np.zeros(n)
        w[order[:k]] = cap
        if resid > 0.0:
            w[order[k]] = resid
        w /= w.sum()
        return CappedWeights(np.minimum(w, cap), rho)
    alpha = 10 ** rng.uniform(-1, 1)
    g = rng.generator.gamma(alpha, size=n)
    return CappedWeights(recap(g, rho), rho)
