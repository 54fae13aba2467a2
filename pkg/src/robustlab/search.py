"""Multi-start ascent over the unit sphere for piecewise-quadratic objectives.

Both direction searches in the package maximise functions of the form
``f(u) = u^T A(u) u`` where ``A(u)`` is locally constant (it depends on a
sort order or on an active set of capped weights). ``fg(u)`` must return the
value and the gradient ``2 A(u) u``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DirectionSearchConfig:
    """Budget for the direction searches.

    restarts: random unit starting directions.
    eigen_candidates: leading eigenvectors taken from each candidate matrix.
    max_steps: ascent steps per start.
    gradient: ``"analytic"`` (exact on each smooth piece) or
        ``"finite_difference"`` (central differences with ``fd_step``).
    planar_grid: for ``d == 2``, number of evenly spaced angles in
        ``[0, pi)`` added as starting points (0 disables).
    stall_tol: relative improvement below which an ascent run stops.
    refine_top: when a batch scorer is available, only the best this many
        starts are refined (0 refines every start).
    """

    restarts: int = 8
    eigen_candidates: int = 3
    max_steps: int = 200
    fd_step: float = 1e-4
    gradient: str = "analytic"
    planar_grid: int = 360
    stall_tol: float = 1e-9
    refine_top: int = 4


def _normalize(u):
    nu = np.linalg.norm(u)
    return u / nu if nu > 0 else u


def fd_gradient(f, u, h):
    d = u.size
    g = np.empty(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        g[j] = (f(u + e) - f(u - e)) / (2 * h)
    return g


def ascend(fg, u0, cfg: DirectionSearchConfig, f_only=None):
    """Monotone ascent on the sphere from ``u0``; returns ``(value, u)``.

    Each step first tries the power-type update ``u <- normalize(grad)``
    and then shrinking tangent steps; only strict improvements are taken.
    """
    u = _normalize(np.asarray(u0, dtype=np.float64))
    if cfg.gradient == "finite_difference":
        if f_only is None:
            f_only = lambda x: fg(x)[0]

        def fg_used(x):
            return f_only(_normalize(x)), fd_gradient(lambda y: f_only(_normalize(y)), x, cfg.fd_step)
    else:
        fg_used = fg
    f, g = fg_used(u)
    rel = 0.0
    for _ in range(cfg.max_steps):
        improved = False
        cands = []
        if np.any(g):
            cands.append(_normalize(g))
            gt = g - (g @ u) * u
            ngt = np.linalg.norm(gt)
            if ngt > 0:
                eta = 1.0 / ngt
                for _k in range(6):
                    cands.append(_normalize(u + eta * gt))
                    eta *= 0.25
        for c in cands:
            fc, gc = fg_used(c)
            if fc > f * (1.0 + cfg.stall_tol) and fc > f:
                rel = (fc - f) / max(abs(f), 1e-300)
                u, f, g = c, fc, gc
                improved = True
                break
        if not improved or rel < cfg.stall_tol:
            break
    return f, u


def candidate_starts(d, matrices, cfg: DirectionSearchConfig, rng) -> list:
    """Starting directions: leading eigenvectors, random vectors, planar grid."""
    starts = []
    for M in matrices:
        if M is None:
            continue
        vals, vecs = np.linalg.eigh(M)
        for j in range(1, min(cfg.eigen_candidates, d) + 1):
            starts.append(vecs[:, -j].copy())
    if cfg.restarts > 0:
        starts.extend(list(rng.unit_vectors(cfg.restarts, d)))
    if d == 2 and cfg.planar_grid > 0:
        th = np.pi * np.arange(cfg.planar_grid) / cfg.planar_grid
        starts.extend(list(np.stack([np.cos(th), np.sin(th)], axis=1)))
    return starts


def maximize_on_sphere(fg, d, matrices, cfg: DirectionSearchConfig, rng, f_only=None, batch_values=None):
    """Best ``(value, u)`` over refined candidate starts.

    ``batch_values(U)`` may evaluate many rows of ``U`` at once; when given,
    all starts are scored in one call and ascent runs from the best
    ``cfg.refine_top`` of them (all of them when ``refine_top`` is 0).
    """
    if d == 1:
        u = np.ones(1)
        return fg(u)[0], u
    starts = candidate_starts(d, matrices, cfg, rng)
    if batch_values is not None and cfg.refine_top > 0 and len(starts) > cfg.refine_top:
        vals = batch_values(np.asarray(starts))
        keep = np.argsort(-vals, kind="stable")[: cfg.refine_top]
        starts = [starts[i] for i in sorted(keep)]
    best_f, best_u = -np.inf, None
    for s in starts:
        f, u = ascend(fg, s, cfg, f_only=f_only)
        # ties keep the earliest candidate for reproducibility
        if best_u is None or f > best_f + 1e-12 * abs(best_f):
            best_f, best_u = f, u
    return best_f, best_u
