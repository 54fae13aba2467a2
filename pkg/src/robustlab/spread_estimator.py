"""Quantile-smoothed spread and the perturbed sub-Gaussian mean estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .core import RngStream, UsageError, as_dataset, weighted_second_moment
from .search import DirectionSearchConfig, maximize_on_sphere


@dataclass(frozen=True)
class TailWeightProfile:
    n: int
    m: float
    wtilde: np.ndarray
    w: np.ndarray


def quantile_weights(n: int, m: float) -> TailWeightProfile:
    """Rank weights ``exp(-m / min(i, n + 1 - i))`` for ranks ``i = 1..n``.

    Ranks near either end of the order are down-weighted; ``m = 0`` gives
    uniform weights.
    """
    if n < 1:
        raise UsageError("n must be >= 1")
    if m < 0:
        raise UsageError("m must be >= 0")
    i = np.arange(1, n + 1, dtype=np.float64)
    depth = np.minimum(i, n + 1 - i)
    wt = np.exp(-m / depth)
    w = wt / wt.sum()
    wt.setflags(write=False)
    w.setflags(write=False)
    return TailWeightProfile(n, float(m), wt, w)


def spread(Y, y: float, m: float) -> float:
    """Weighted RMS deviation of the sorted values ``Y`` from ``y``."""
    Y = np.asarray(Y, dtype=np.float64).reshape(-1)
    if Y.size < 1:
        raise UsageError("spread needs at least one value")
    prof = quantile_weights(Y.size, m)
    ys = np.sort(Y, kind="stable")
    return math.sqrt(max(float(prof.w @ (ys - y) ** 2), 0.0))


def comparison(v) -> np.ndarray:
    """Flip ``v`` so its first nonzero coordinate is positive (zero stays zero)."""
    v = np.asarray(v, dtype=np.float64)
    nz = np.flatnonzero(v)
    if nz.size == 0:
        return v.copy()
    return v.copy() if v[nz[0]] > 0 else -v


def max_spread_direction(
    X,
    mu_tilde,
    m: float,
    search: DirectionSearchConfig | None = None,
    rng: RngStream | None = None,
    capped_weights=None,
):
    """Search for the unit direction maximising the spread of the projections.

    Returns ``(v, sigma)``; ``sigma`` is the spread evaluated exactly at
    ``v`` and so is a lower bound on the true maximum. Candidate starts are
    the leading eigenvectors of the centred second moment under uniform
    weights and under ``capped_weights`` (when given), plus random
    directions; each is refined by monotone ascent.
    """
    X = as_dataset(X)
    search = search or DirectionSearchConfig()
    rng = rng or RngStream(0)
    mu_tilde = np.asarray(mu_tilde, dtype=np.float64).reshape(-1)
    if mu_tilde.shape[0] != X.d:
        raise UsageError("centre dimension does not match the data")
    Z = np.ascontiguousarray(X.points - mu_tilde)
    w = np.ascontiguousarray(quantile_weights(X.n, m).w)
    if not np.any(Z):
        v = np.zeros(X.d)
        v[0] = 1.0
        return v, 0.0

    def fg(u):
        return kernels.spread_value_grad(Z, u, w)

    def batch(U):
        return kernels.spread_values(U @ Z.T, w)

    mats = [weighted_second_moment(X, np.full(X.n, 1.0 / X.n), mu_tilde)]
    if capped_weights is not None:
        mats.append(weighted_second_moment(X, capped_weights, mu_tilde))
    f, v = maximize_on_sphere(fg, X.d, mats, search, rng, batch_values=batch)
    v = v / np.linalg.norm(v)
    # re-evaluate at the normalised direction so sigma is exact for v
    f = kernels.spread_value_grad(Z, v, w)[0]
    return v, math.sqrt(max(f, 0.0))


@dataclass(frozen=True)
class SubGaussianEstimate:
    mu_tilde: np.ndarray
    v: np.ndarray
    sigma_v: float
    eps: float
    s: int
    mu_hat: np.ndarray
    objective: float = float("nan")
    solution: object = field(default=None, repr=False, compare=False)


def eps_for(n: int, delta: float) -> float:
    if not (0.0 < delta <= 0.25):
        raise UsageError(f"delta must lie in (0, 1/4], got {delta}")
    eps = math.log(4.0 / delta) / n
    if eps >= 0.5:
        raise UsageError(f"delta={delta} is too small for n={n}: eps={eps:.4f} >= 1/2")
    return eps


# significant bits kept in the canonical frame; coarse enough that X and
# alpha X + b round to the same values, fine enough to be statistically invisible
_CANONICAL_BITS = 26


def canonical_frame(P):
    """``(m, scale, Z)`` with ``Z = (P - m) / scale`` rounded to
    ``_CANONICAL_BITS`` significant bits.

    ``m`` is the coordinatewise median and ``scale`` the median distance to
    it, so translating the data or scaling it by a positive factor leaves
    ``Z`` unchanged up to the rounding. The iterative solver then sees the
    same input for every member of the affine family and the estimate moves
    exactly with the data.
    """
    P = np.asarray(P, dtype=np.float64)
    m = np.median(P, axis=0)
    dist = np.linalg.norm(P - m, axis=1)
    scale = float(np.median(dist))
    if scale <= 0.0:
        scale = float(dist.max())
    if scale <= 0.0:
        scale = 1.0
    frac, expo = np.frexp((P - m) / scale)
    Z = np.ldexp(np.round(frac * 2.0**_CANONICAL_BITS) / 2.0**_CANONICAL_BITS, expo)
    return m, scale, Z


def subg_core(X, delta: float, rng: RngStream | None = None, search: DirectionSearchConfig | None = None, **solver_kw):
    """Shared part of both versions: ``(eps, solution, v, sigma_v)``.

    The work is done in :func:`canonical_frame` coordinates and mapped back;
    the returned solution's centre, objective and history are in the data's
    units.
    """
    from .stability import solve_rob_sdp

    X = as_dataset(X)
    rng = rng or RngStream(0)
    eps = eps_for(X.n, delta)
    m, scale, Z = canonical_frame(X.points)
    if solver_kw.get("center") is not None:
        solver_kw = {**solver_kw, "center": (np.asarray(solver_kw["center"], dtype=np.float64) - m) / scale}
    sol = solve_rob_sdp(Z, eps, rng=rng.child(0), **solver_kw)
    v, sigma = max_spread_direction(Z, sol.center, X.n * eps, search, rng.child(1), capped_weights=sol.weights)
    v = comparison(v)
    s2 = scale * scale
    sol = replace(
        sol,
        center=m + scale * sol.center,
        objective=sol.objective * s2,
        history=tuple(h * s2 for h in sol.history),
    )
    return eps, sol, v, scale * sigma


def _assemble(eps, sol, v, sigma, s):
    mu_hat = sol.center + s * math.sqrt(eps) * sigma * v
    return SubGaussianEstimate(sol.center, v, sigma, eps, s, mu_hat, sol.objective, sol)


def subg_estimate(X, delta: float, s: int, rng: RngStream | None = None, search: DirectionSearchConfig | None = None, **solver_kw) -> SubGaussianEstimate:
    """Robust centre plus a signed perturbation ``s * sqrt(eps) * sigma_v * v``.

    ``eps = log(4 / delta) / n``. Deterministic given ``(X, delta, s, rng)``.
    """
    if s not in (1, -1):
        raise UsageError("s must be +1 or -1")
    return _assemble(*subg_core(X, delta, rng, search, **solver_kw), s)


def subg_estimate_pair(X, delta: float, rng: RngStream | None = None, search: DirectionSearchConfig | None = None, **solver_kw):
    """Both versions ``(s=+1, s=-1)`` from one shared computation."""
    core = subg_core(X, delta, rng, search, **solver_kw)
    return _assemble(*core, 1), _assemble(*core, -1)
