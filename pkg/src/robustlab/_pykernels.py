"""Numpy implementations of the inner-loop kernels.

These are the reference versions; ``_ckernels.pyx`` provides compiled
equivalents with identical signatures and semantics. ``robustlab.kernels``
picks one at import time.
"""

import numpy as np


def spread_value_grad(Z, u, w):
    """Quantile-weighted squared spread of ``Z @ u`` and its gradient in ``u``.

    Projections are sorted ascending (ties by index) and the i-th smallest
    one receives weight ``w[i]``. For a fixed ordering the value is the
    quadratic form ``u^T A u`` with ``A = sum_k w_k z_(k) z_(k)^T``, so the
    gradient returned is ``2 A u``.
    """
    p = Z @ u
    order = np.argsort(p, kind="stable")
    ps = p[order]
    value = float(w @ (ps * ps))
    grad = 2.0 * ((w * ps) @ Z[order])
    return value, grad


def spread_values(P, w):
    """Row-wise quantile-weighted sum of squares of already-centred projections."""
    P = np.sort(P, axis=1, kind="stable")
    return (P * P) @ w


def capped_min_rows(A, k, cap, resid):
    """Row-wise minimum of a linear objective over the capped simplex.

    The ``k`` smallest entries of each row get weight ``cap`` and the next
    one gets ``resid``.
    """
    A = np.sort(A, axis=1)
    out = cap * A[:, :k].sum(axis=1)
    if resid > 0.0 and k < A.shape[1]:
        out = out + resid * A[:, k]
    return out


def dilate_once(ind, nbits):
    """One round of single-bit-flip dilation of a subset of {0,1}^nbits."""
    idx = np.arange(ind.shape[0], dtype=np.int64)
    out = ind.copy()
    for b in range(nbits):
        out |= ind[idx ^ (1 << b)]
    return out


def _popcount(nbits):
    idx = np.arange(1 << nbits, dtype=np.int64)
    pc = np.zeros_like(idx)
    for b in range(nbits):
        pc += (idx >> b) & 1
    return pc


def cube_mass(ind, nbits, p):
    """Product Bernoulli(p) measure of the subset flagged by ``ind``."""
    pc = _popcount(nbits)
    probs = np.power(p, pc) * np.power(1.0 - p, nbits - pc)
    return float(probs[ind.astype(bool)].sum())


def project_capped(y, cap):
    """Euclidean projection onto ``{0 <= w <= cap, sum w = 1}``.

    ``w = clip(y - theta, 0, cap)``; ``theta`` is bracketed between adjacent
    sorted breakpoints of the mass function and solved exactly there.
    """
    y = np.asarray(y, dtype=np.float64)
    bps = np.sort(np.concatenate([y - cap, y]))

    def mass(theta):
        return np.clip(y - theta, 0.0, cap).sum()

    lo, hi = 0, bps.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mass(bps[mid]) >= 1.0:
            lo = mid
        else:
            hi = mid
    a, b = bps[lo], bps[hi]
    ma, mb = mass(a), mass(b)
    theta = a if ma == mb else a + (ma - 1.0) * (b - a) / (ma - mb)
    w = np.clip(y - theta, 0.0, cap)
    w /= w.sum()
    return np.minimum(w, cap)
