"""Capped-weight spectral program: filter solver, brute-force oracle,
vectorised objective, Gaussian rounding and stability certificates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import (
    NumericError,
    RngStream,
    UsageError,
    as_dataset,
    top_eigenpair,
    weighted_second_moment,
)
from .search import DirectionSearchConfig, maximize_on_sphere
from .weights import (
    CappedWeights,
    cap_for,
    min_linear_over_capped_simplex,
    min_linear_values,
    recap,
    tv_distance,
)


@dataclass(frozen=True)
class RobSdpSolution:
    weights: CappedWeights
    center: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: tuple = ()
    direction: np.ndarray | None = None

    @property
    def rho(self) -> float:
        return self.weights.rho


def _weighted_median(values, w):
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(w[order])
    k = int(np.searchsorted(cw, 0.5 * cw[-1]))
    return values[order[min(k, values.size - 1)]]


class _Objective:
    """Spectral norm of the weighted second moment about the weighted mean
    (or about a fixed centre)."""

    def __init__(self, P, center, rng, eig_tol, eigensolver):
        if eigensolver not in ("lapack", "power"):
            raise UsageError(f"unknown eigensolver {eigensolver!r}")
        self.P = P
        self.fixed = None if center is None else np.asarray(center, dtype=np.float64)
        self.rng = rng
        self.eig_tol = eig_tol
        self.eigensolver = eigensolver
        self.v = None

    def center(self, w):
        return w @ self.P if self.fixed is None else self.fixed

    def __call__(self, w):
        c = self.center(w)
        Z = self.P - c
        M = (Z * w[:, None]).T @ Z
        M = 0.5 * (M + M.T)
        if self.eigensolver == "power":
            lam, v = top_eigenpair(M, tol=self.eig_tol, rng=self.rng, start=self.v)
        else:
            vals, vecs = np.linalg.eigh(M)
            lam, v = float(vals[-1]), vecs[:, -1]
        return max(lam, 0.0), v, c, M


def solve_rob_sdp(
    X,
    rho: float,
    max_iters: int | None = None,
    tol: float = 1e-6,
    rng: RngStream | None = None,
    center=None,
    eig_tol: float = 1e-10,
    refine: bool | None = None,
    eigensolver: str = "lapack",
) -> RobSdpSolution:
    """Approximately minimise ``||sum_i w_i (x_i - x)(x_i - x)^T||`` over
    ``w`` in ``W_rho`` and the centre ``x``.

    For fixed weights the best centre is the weighted mean, so the search
    runs over weights only. The first phase is soft filtering: scores
    ``<x_i - mu_w, v>^2`` along the top eigenvector, weights above the
    weighted-median score shrunk by ``1 - score / max_score``, then
    renormalised and re-capped; when that stalls, a multiplicative-weights
    step on a softmax-smoothed spectral norm is tried. When progress drops
    below a relative ``1e-2`` per step and ``refine`` is set (by default for
    ``n <= 1000``), the second phase alternates between solving the convex problem in ``w``
    at the current centre (projected gradient on a softmax-smoothed spectral
    norm, with the smoothing shrunk geometrically) and moving the centre to
    the new weighted mean. Both phases accept strict decreases only, so
    ``history`` is non-increasing and the returned objective is attained by
    the returned weights. ``converged`` is false only when ``max_iters``
    ran out first.

    With ``center`` given, the centre is held fixed and the problem is the
    convex program in ``w`` alone.

    ``eigensolver="power"`` evaluates spectral norms with
    :func:`~robustlab.core.top_eigenpair` (tolerance ``eig_tol``) instead of
    a dense LAPACK solve.
    """
    X = as_dataset(X)
    n, d = X.n, X.d
    if n < 2:
        raise UsageError("solve_rob_sdp needs n >= 2")
    if not (0.0 <= rho < 0.5):
        raise UsageError(f"rho must lie in [0, 1/2), got {rho}")
    if center is not None and np.asarray(center).reshape(-1).shape[0] != d:
        raise UsageError("centre dimension does not match the data")
    max_iters = 10 * n if max_iters is None else max_iters
    refine = n <= 1000 if refine is None else refine
    rng = rng or RngStream(0)
    P = X.points
    if center is None and not np.any(P - P[0]):
        # identical points: uniform weights are optimal with objective 0
        v = np.zeros(d)
        v[0] = 1.0
        return RobSdpSolution(CappedWeights(np.full(n, 1.0 / n), rho), P[0].copy(), 0.0, 0, True, (0.0,), v)
    obj_fn = _Objective(P, center, rng, eig_tol, eigensolver)
    w = np.full(n, 1.0 / n)
    uniform = w.copy()
    state = obj_fn(w)
    obj, v, c, M = state
    obj_fn.v = v
    history = [obj]
    converged = False
    it = 0
    phase = "filter"
    while it < max_iters:
        if obj <= 0.0:
            converged = True
            break
        it += 1
        if phase == "filter":
            cand = _filter_step(P, w, c, v, rho)
            res = None if cand is None else _try(obj_fn, cand, obj, uniform, rho)
            if res is None or (obj - res[0]) < tol * obj:
                alt = _mirror_step(obj_fn, P, w, c, M, obj, rho, uniform)
                if alt is not None and (res is None or alt[0] < res[0]):
                    res = alt
        else:
            cand = _convex_refine(P, w, c, rho)
            res = None if cand is None else _try(obj_fn, cand, obj, uniform, rho)
        rel = 0.0 if res is None else (obj - res[0]) / obj
        if res is not None:
            obj, w, v, c, M = res
            obj_fn.v = v
            history.append(obj)
        if phase == "filter" and refine and rel < max(tol, _HANDOVER):
            phase = "refine"
            continue
        if rel < tol:
            converged = True
            break
    weights = CappedWeights(w, rho)
    center_out = obj_fn.center(weights.w)
    return RobSdpSolution(weights, np.array(center_out), float(obj), it, converged, tuple(history), v)


def _try(obj_fn, cand, obj, uniform, rho):
    # removed mass beyond 2 rho would leave W_rho's neighbourhood of uniform
    if tv_distance(cand, uniform) > 2 * rho + 1e-12:
        return None
    new_obj, v, c, M = obj_fn(cand)
    if new_obj < obj * (1.0 - _NOISE):
        return new_obj, cand, v, c, M
    return None


def _filter_step(P, w, c, v, rho):
    scores = ((P - c) @ v) ** 2
    tmax = scores.max()
    if tmax <= 0:
        return None
    med = _weighted_median(scores, w)
    factor = np.where(scores > med, 1.0 - scores / tmax, 1.0)
    if np.all(factor == 1.0):
        return None
    return recap(w * factor, rho)


def _mirror_step(obj_fn, P, w, c, M, obj, rho, uniform):
    """Best multiplicative-weights step on the softmax-smoothed objective.

    Projections are weighted by a softmax of the eigenvalues at several
    temperatures; this copes with coalescing top eigenvalues, where
    single-eigenvector steps zigzag.
    """
    lam, U = np.linalg.eigh(M)
    proj2 = ((P - c) @ U) ** 2
    best = None
    for temp in _TEMPERATURES:
        t = max(temp * lam[-1], 1e-300)
        pw = np.exp((lam - lam[-1]) / t)
        g = proj2 @ (pw / pw.sum())
        gmax = g.max()
        if gmax <= 0:
            continue
        g = g / gmax
        for eta in _STEPS:
            res = _try(obj_fn, recap(w * np.exp(-eta * g), rho), obj, uniform, rho)
            if res is not None and (best is None or res[0] < best[0]):
                best = res
    return best


# decreases below this relative size are rounding noise; accepting them would
# let the last bits of the input steer the iterates along flat directions
_NOISE = 1e-12
# relative decrease below which filtering hands over to the convex refinement
_HANDOVER = 1e-2
_TEMPERATURES = (0.3, 0.1, 0.03, 0.01)
_STEPS = (8.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.1)


def _smoothed(P, w, c, t):
    """Value, gradient and spectral norm of ``t log tr exp(M(w) / t)``."""
    Z = P - c
    M = (Z * w[:, None]).T @ Z
    lam, U = np.linalg.eigh(0.5 * (M + M.T))
    e = np.exp((lam - lam[-1]) / t)
    val = lam[-1] + t * np.log(e.sum())
    grad = ((Z @ U) ** 2) @ (e / e.sum())
    return val, grad, lam[-1]


_LEVELS = (0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 3e-4)


def _convex_refine(P, w, c, rho, inner: int = 40):
    """Best iterate of projected gradient on the smoothed fixed-centre problem."""
    n = w.size
    cap = cap_for(n, rho)
    w = w.copy()
    _, g, ref = _smoothed(P, w, c, 1.0)
    if ref <= 0:
        return None
    best_f, best_w = ref, None
    step = None
    for level in _LEVELS:
        t = level * best_f
        fs, g, _ = _smoothed(P, w, c, t)
        base = n / max(g.max(), 1e-300)
        step = 1e-2 * base if step is None else max(step, 1e-4 * base)
        for _ in range(inner):
            moved = False
            for tries in range(40):
                cand = kernels.project_capped(w - step * g, cap)
                f2, g2, top2 = _smoothed(P, cand, c, t)
                # half the linearised decrease keeps the step below 1 / L, where
                # the projected step is nonexpansive and rounding cannot grow
                if f2 <= fs - 0.5 * float(g @ (w - cand)) and f2 < fs * (1.0 - _NOISE):
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
            rel = (fs - f2) / fs
            w, fs, g = cand, f2, g2
            step *= 1.5
            if top2 < best_f * (1.0 - _NOISE):
                best_f, best_w = top2, w.copy()
            # a full-length step with negligible progress: stationary at this level
            if rel < 1e-10 and tries == 0:
                break
    return best_w


# --- brute-force oracle (d <= 2) -------------------------------------------


def _quad_coeffs(Z):
    """Rows ``(a, b, c)`` with ``z^T M z = a + p b + q c`` for the density
    matrix ``M = 1/2 [[1 + p, q], [q, 1 - p]]``, ``p^2 + q^2 <= 1``."""
    a = 0.5 * (Z[:, 0] ** 2 + Z[:, 1] ** 2)
    b = 0.5 * (Z[:, 0] ** 2 - Z[:, 1] ** 2)
    c = Z[:, 0] * Z[:, 1]
    return a, b, c


def _disk_points(grid):
    t = np.linspace(-1.0, 1.0, grid + 1)
    pp, qq = np.meshgrid(t, t)
    pts = np.stack([pp.ravel(), qq.ravel()], axis=1)
    pts = pts[(pts**2).sum(axis=1) <= 1.0]
    th = 2 * np.pi * np.arange(4 * grid) / (4 * grid)
    return np.vstack([pts, np.stack([np.cos(th), np.sin(th)], axis=1)])


def _clip_disk(pts):
    r = np.sqrt((pts**2).sum(axis=1))
    scale = np.where(r > 1.0, 1.0 / np.maximum(r, 1e-300), 1.0)
    return pts * scale[:, None]


def dual_value(Z, rho: float, grid: int = 48, rounds: int = 6):
    """``max_M min_{w in W_rho} sum_i w_i z_i^T M z_i`` over density matrices
    ``M`` (``d <= 2``), by a dense grid over the disk of 2x2 density matrices
    followed by local zooming (the objective is concave in ``M``).

    Returns ``(value, M)``; by minimax duality ``value`` equals
    ``min_{w in W_rho} ||sum_i w_i z_i z_i^T||`` up to grid resolution.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    d = Z.shape[1]
    if d > 2:
        raise UsageError("dual_value enumerates density matrices only for d <= 2")
    if d == 1:
        return float(min_linear_values((Z[:, 0] ** 2)[None, :], rho)[0]), np.ones((1, 1))
    a, b, c = _quad_coeffs(Z)
    pts = _disk_points(grid)
    vals = min_linear_values(a[None, :] + pts[:, :1] * b[None, :] + pts[:, 1:] * c[None, :], rho)
    best = int(np.argmax(vals))
    bp, bv = pts[best], vals[best]
    h = 2.0 / grid
    for _ in range(rounds):
        t = np.linspace(-h, h, 9)
        dp, dq = np.meshgrid(t, t)
        local = _clip_disk(bp + np.stack([dp.ravel(), dq.ravel()], axis=1))
        lv = min_linear_values(a[None, :] + local[:, :1] * b[None, :] + local[:, 1:] * c[None, :], rho)
        j = int(np.argmax(lv))
        if lv[j] > bv:
            bp, bv = local[j], lv[j]
        h /= 4.0
    p, q = bp
    M = 0.5 * np.array([[1 + p, q], [q, 1 - p]])
    return float(bv), M


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    center: np.ndarray
    M: np.ndarray


def rob_sdp_bruteforce(X, rho: float, grid: int = 24, dual_grid: int = 24, rounds: int = 5) -> BruteForceResult:
    """Grid search over centres of the exact-dual inner value (``d <= 2``).

    The centre grid spans the data's bounding box and is zoomed around the
    best few cells; each centre is scored with :func:`dual_value`.
    """
    X = as_dataset(X)
    if X.d > 2:
        raise UsageError("brute force is limited to d <= 2")
    P = X.points
    if not np.any(P - P[0]):
        return BruteForceResult(0.0, P[0].copy(), np.eye(X.d) / X.d)
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)

    def score(c):
        return dual_value(P - c, rho, grid=dual_grid, rounds=3)[0]

    axes = [np.linspace(lo[j], hi[j], grid + 1) for j in range(X.d)]
    centers = np.stack([g.ravel() for g in np.meshgrid(*axes)], axis=1)
    scores = np.array([score(c) for c in centers])
    seeds = centers[np.argsort(scores, kind="stable")[:4]]
    best_c, best_v = centers[int(np.argmin(scores))], float(scores.min())
    for c0 in seeds:
        c_best, v_best = c0, score(c0)
        h = span / grid
        for _ in range(rounds):
            t = np.linspace(-1.0, 1.0, 7)
            offs = np.stack([g.ravel() for g in np.meshgrid(*([t] * X.d))], axis=1) * h
            local = c_best + offs
            lv = np.array([score(c) for c in local])
            j = int(np.argmin(lv))
            if lv[j] < v_best:
                c_best, v_best = local[j], float(lv[j])
            h = h / 3.0
        if v_best < best_v:
            best_c, best_v = c_best, v_best
    value, M = dual_value(P - best_c, rho, grid=48, rounds=6)
    return BruteForceResult(value, np.array(best_c), M)


def rob_sdp_value_bruteforce(X, rho: float, grid: int = 24) -> float:
    """Independent estimate of the joint optimum over centres and ``W_rho``."""
    return rob_sdp_bruteforce(X, rho, grid=grid).value


# --- vectorised objective and rounding --------------------------------------


def vectorized_objective(
    X,
    rho: float,
    x,
    search: DirectionSearchConfig | None = None,
    rng: RngStream | None = None,
):
    """``max_{||v||=1} min_{w in W_{rho/4}} sum_i w_i <v, x_i - x>^2``.

    Returns ``(value, v)``; the value is evaluated exactly at ``v`` and so is
    a lower bound on the true maximum.
    """
    X = as_dataset(X)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != X.d:
        raise UsageError("centre dimension does not match the data")
    search = search or DirectionSearchConfig()
    rng = rng or RngStream(0)
    Z = X.points - x
    inner = rho / 4.0

    def fg(u):
        proj = Z @ u
        val, wts = min_linear_over_capped_simplex(proj**2, inner)
        return val, 2.0 * ((wts.w * proj) @ Z)

    def batch(U):
        return min_linear_values((U @ Z.T) ** 2, inner)

    if not np.any(Z):
        v = np.zeros(X.d)
        v[0] = 1.0
        return 0.0, v
    M = weighted_second_moment(X, np.full(X.n, 1.0 / X.n), x)
    f, v = maximize_on_sphere(fg, X.d, [M], search, rng, batch_values=batch)
    v = v / np.linalg.norm(v)
    return fg(v)[0], v


def vectorized_objective_grid(X, rho: float, x, angles: int = 3600):
    """Dense angular-grid version of :func:`vectorized_objective` (``d <= 2``)."""
    X = as_dataset(X)
    Z = X.points - np.asarray(x, dtype=np.float64).reshape(-1)
    if X.d == 1:
        return float(min_linear_values((Z[:, 0] ** 2)[None, :], rho / 4.0)[0]), np.ones(1)
    if X.d != 2:
        raise UsageError("angular grid needs d <= 2")
    th = np.pi * np.arange(angles) / angles
    U = np.stack([np.cos(th), np.sin(th)], axis=1)
    vals = min_linear_values((U @ Z.T) ** 2, rho / 4.0)
    j = int(np.argmax(vals))
    return float(vals[j]), U[j]


@dataclass(frozen=True)
class RoundingOutcome:
    direction: np.ndarray
    lower_bound: float
    trials_used: int
    event_frequency: float


def gaussian_round(Z, M, rho: float, trials: int = 64, rng: RngStream | None = None) -> RoundingOutcome:
    """Round a density matrix ``M`` to a direction by Gaussian sampling.

    Draws ``g ~ N(0, M)``, normalises it and scores the direction by the
    exact inner minimum over ``W_{rho/4}``; the best draw wins.
    ``event_frequency`` is the fraction of (draw, point) pairs on which
    ``||g|| <= 4`` and ``|<z_i, g>| >= sqrt(z_i^T M z_i) / 4`` both hold.
    """
    Z = np.asarray(getattr(Z, "points", Z), dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    M = np.asarray(M, dtype=np.float64)
    d = Z.shape[1]
    if M.shape != (d, d):
        raise UsageError(f"M must be {d}x{d}")
    if np.max(np.abs(M - M.T)) > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise UsageError("M must be symmetric")
    lam, U = np.linalg.eigh(0.5 * (M + M.T))
    if lam[0] < -1e-9:
        raise UsageError("M must be positive semidefinite")
    if np.trace(M) > 1.0 + 1e-9:
        raise UsageError("M must have trace at most 1")
    if trials < 1:
        raise UsageError("trials must be >= 1")
    rng = rng or RngStream(0)
    L = U * np.sqrt(np.clip(lam, 0.0, None))
    G = rng.normal(size=(trials, d)) @ L.T
    norms = np.linalg.norm(G, axis=1)
    ok = norms > 0
    quad = np.einsum("ij,jk,ik->i", Z, M, Z)
    proj = G @ Z.T
    event = (norms[:, None] <= 4.0) & (np.abs(proj) >= np.sqrt(np.clip(quad, 0, None))[None, :] / 4.0)
    if not np.any(ok):
        v = np.zeros(d)
        v[0] = 1.0
        return RoundingOutcome(v, 0.0, trials, float(event.mean()))
    Gt = G[ok] / norms[ok, None]
    vals = min_linear_values((Gt @ Z.T) ** 2, rho / 4.0)
    j = int(np.argmax(vals))
    return RoundingOutcome(Gt[j], float(vals[j]), trials, float(event.mean()))


# --- stability ---------------------------------------------------------------


@dataclass(frozen=True)
class StabilityCertificate:
    subset: tuple
    gamma: float
    nu: float
    mean_gap: float
    spectral_bound: float


def _subset_stats(Y, idx, mu):
    S = Y[list(idx)]
    gap = float(np.linalg.norm(S.mean(axis=0) - mu))
    Zs = S - mu
    spec = float(np.linalg.eigvalsh(Zs.T @ Zs / len(idx))[-1])
    return gap, max(spec, 0.0)


def _satisfies(gap, spec, gamma):
    return gap <= gamma * (1 + 1e-12) + 1e-15 and spec <= gamma**2 * (1 + 1e-12) + 1e-15


def check_stability(S, mu, gamma: float, nu: float, mode: str = "exact"):
    """Search for a subset witnessing ``(gamma, nu)``-stability about ``mu``.

    ``exact`` enumerates every subset of size at least ``(1 - nu) n``
    (``n <= 20``) and is sound and complete. ``greedy`` repeatedly drops the
    point with the largest squared projection on the top eigenvector of the
    current second moment; it is sound but may miss witnesses. Returns a
    :class:`StabilityCertificate` (re-verified) or ``None``.
    """
    S = as_dataset(S)
    if not (0.0 < nu <= 0.1):
        raise UsageError(f"nu must lie in (0, 1/10], got {nu}")
    if gamma < 0:
        raise UsageError("gamma must be >= 0")
    Y = S.points
    n = S.n
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    k_min = max(1, math.ceil((1.0 - nu) * n - 1e-9))
    found = None
    if mode == "exact":
        if n > 20:
            raise UsageError("exact stability search needs n <= 20")
        Zall = Y - mu
        tot1 = Zall.sum(axis=0)
        tot2 = Zall.T @ Zall
        for k in range(n, k_min - 1, -1):
            for removed in itertools.combinations(range(n), n - k):
                r = list(removed)
                s1 = tot1 - Zall[r].sum(axis=0)
                s2 = tot2 - Zall[r].T @ Zall[r]
                gap = float(np.linalg.norm(s1 / k))
                spec = float(np.linalg.eigvalsh(s2 / k)[-1])
                if _satisfies(gap, spec, gamma * (1 + 1e-9)):
                    found = tuple(i for i in range(n) if i not in set(r))
                    break
            if found is not None:
                break
    elif mode == "greedy":
        keep = list(range(n))
        while True:
            gap, spec = _subset_stats(Y, keep, mu)
            if _satisfies(gap, spec, gamma):
                found = tuple(keep)
                break
            if len(keep) - 1 < k_min:
                break
            Zk = Y[keep] - mu
            _, vecs = np.linalg.eigh(Zk.T @ Zk)
            scores = (Zk @ vecs[:, -1]) ** 2
            keep.pop(int(np.argmax(scores)))
    else:
        raise UsageError(f"unknown mode {mode!r}")
    if found is None:
        return None
    gap, spec = _subset_stats(Y, found, mu)
    if not _satisfies(gap, spec, gamma) or len(found) < k_min:
        return None
    return StabilityCertificate(found, float(gamma), float(nu), gap, spec)


@dataclass(frozen=True)
class StableSet:
    indices: np.ndarray
    threshold: float
    size_bound: float
    mean: np.ndarray
    spectral_norm: float

    @property
    def size(self) -> int:
        return int(self.indices.size)


def extract_stable_set(sol: RobSdpSolution, eps: float, c1: float = 1.0, X=None) -> StableSet:
    """Indices whose weight is at least half the ``W_{c1 eps / 4}`` cap.

    ``sol`` must have been solved over ``W_rho`` with ``rho <= c1 eps / 4``;
    the counting argument then guarantees at least ``(1 - c1 eps / 2) n``
    indices, which is asserted. When ``X`` is given, the uniform mean over
    the set and the spectral norm of its centred second moment are reported.
    """
    w = sol.weights.w
    n = w.size
    a = c1 * eps / 4.0
    if not (0 <= a < 0.5):
        raise UsageError("c1 * eps / 4 must lie in [0, 1/2)")
    if sol.weights.rho > a + 1e-12:
        raise UsageError(f"solution was solved with rho={sol.weights.rho}, needs rho <= c1*eps/4={a}")
    thr = 1.0 / (2.0 * (1.0 - a) * n)
    idx = np.flatnonzero(w >= thr * (1 - 1e-12))
    bound = (1.0 - c1 * eps / 2.0) * n
    if idx.size < bound - 1e-9:
        raise NumericError(f"stable set has {idx.size} < {bound} indices")
    mean = np.full(0, np.nan)
    spec = float("nan")
    if X is not None:
        P = as_dataset(X).points[idx]
        mean = P.mean(axis=0)
        Zs = P - mean
        spec = float(np.linalg.eigvalsh(Zs.T @ Zs / max(idx.size, 1))[-1])
    return StableSet(idx, thr, bound, mean, max(spec, 0.0) if not math.isnan(spec) else spec)
