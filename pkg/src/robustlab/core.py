"""Shared numeric primitives: datasets, random streams, weighted moments and
a power-iteration eigensolver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class UsageError(ValueError):
    """Raised when an operation is called outside its documented domain."""


class NumericError(ArithmeticError):
    """Raised when an iterative routine fails to converge.

    The last observed residual is kept on ``residual``.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """``n`` points in ``R^d``, stored as a read-only ``(n, d)`` array.

    One-dimensional input is treated as ``n`` scalar observations.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise UsageError(f"points must be 1-D or 2-D, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise UsageError(f"dataset needs n >= 1 and d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise UsageError("dataset entries must be finite")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def affine(self, scale: float, shift) -> "Dataset":
        """Return ``scale * X + shift``."""
        return Dataset(scale * self.points + np.asarray(shift, dtype=np.float64))


def as_dataset(X) -> Dataset:
    return X if isinstance(X, Dataset) else Dataset(X)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by ``(seed, stream)``.

    Distinct stream ids give statistically independent generators (numpy
    ``SeedSequence`` spawn keys); the same pair always replays the same draws.
    """

    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream),))
        object.__setattr__(self, "_gen", np.random.Generator(np.random.PCG64(ss)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, index: int) -> "RngStream":
        """Deterministic sub-stream, independent of this one and its siblings."""
        return RngStream(self.seed, (int(self.stream) << 20) + 1 + int(index))

    def normal(self, *args, **kwargs):
        return self._gen.normal(*args, **kwargs)

    def uniform(self, *args, **kwargs):
        return self._gen.uniform(*args, **kwargs)

    def integers(self, *args, **kwargs):
        return self._gen.integers(*args, **kwargs)

    def permutation(self, *args, **kwargs):
        return self._gen.permutation(*args, **kwargs)

    def choice(self, *args, **kwargs):
        return self._gen.choice(*args, **kwargs)

    def unit_vectors(self, k: int, d: int) -> np.ndarray:
        g = self._gen.standard_normal((k, d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return g / norms


def _weights_array(w, n):
    arr = np.asarray(getattr(w, "w", w), dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise UsageError(f"weight vector has length {arr.shape}, expected {n}")
    return arr


def weighted_mean(X, w) -> np.ndarray:
    """Return ``sum_i w_i x_i``."""
    X = as_dataset(X)
    arr = _weights_array(w, X.n)
    return arr @ X.points


def weighted_second_moment(X, w, x) -> np.ndarray:
    """Return ``sum_i w_i (x_i - x)(x_i - x)^T`` as a symmetric ``(d, d)`` array."""
    X = as_dataset(X)
    arr = _weights_array(w, X.n)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != X.d:
        raise UsageError(f"centre has dimension {x.shape[0]}, dataset has {X.d}")
    Z = X.points - x
    M = (Z * arr[:, None]).T @ Z
    return 0.5 * (M + M.T)


def check_symmetric(M, rtol=1e-12) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise UsageError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if np.max(np.abs(M - M.T), initial=0.0) > rtol * scale:
        raise UsageError("matrix is not symmetric")
    return M


def _power(M, v0, tol, max_iter, squarings):
    lam_scale = max(float(np.linalg.norm(M, ord="fro")), 1e-300)
    # repeated squaring amplifies the spectral gap before plain iteration
    B = M / lam_scale

    def square(B):
        B2 = B @ B
        nb = np.linalg.norm(B2, ord="fro")
        if nb == 0.0 or not np.isfinite(nb):
            return B
        B2 /= nb
        return 0.5 * (B2 + B2.T)

    for _ in range(squarings):
        B = square(B)
    v = v0 / np.linalg.norm(v0)
    res = np.inf
    lam = 0.0
    for it in range(max_iter):
        Mv = M @ v
        lam = float(v @ Mv)
        res = float(np.linalg.norm(Mv - lam * v))
        if res <= tol * max(lam, 1.0):
            return lam, v, res, True
        if it % 20 == 19 and squarings < 60:
            # slow progress means a small relative gap; amplify it further
            B = square(B)
            squarings += 1
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector in the null space of the squared operator
            w = Mv
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0, v, 0.0, True
        v = w / nw
    return lam, v, res, False


def top_eigenpair(M, tol: float = 1e-9, rng: RngStream | None = None, start=None, max_iter: int = 2000):
    """Largest eigenvalue and a unit eigenvector of a symmetric PSD matrix.

    Power iteration from a deterministic start (all-ones, or ``start`` when
    given) plus one random restart; the pair with the larger Rayleigh
    quotient is returned. The random restart draws from ``rng`` (a fixed
    stream when omitted).

    Raises
    ------
    NumericError
        If neither run reaches ``||Mv - lam v|| <= tol * max(lam, 1)``.
    """
    M = check_symmetric(M, rtol=1e-9)
    d = M.shape[0]
    if not np.any(M):
        v = np.ones(d) / np.sqrt(d)
        return 0.0, v
    if d == 1:
        return float(M[0, 0]), np.ones(1)
    squarings = 5
    v0 = np.ones(d) if start is None else np.asarray(start, dtype=np.float64)
    if not np.any(v0):
        v0 = np.ones(d)
    if rng is None:
        rng = RngStream(0x5EED, 0)
    v1 = rng.normal(size=d)
    if not np.any(v1):
        v1[0] = 1.0
    best = None
    worst_res = 0.0
    for start_vec in (v0, v1):
        lam, v, res, ok = _power(M, start_vec, tol, max_iter, squarings)
        worst_res = max(worst_res, res)
        if ok and (best is None or lam > best[0]):
            best = (lam, v)
    if best is None:
        raise NumericError("power iteration did not converge", residual=worst_res)
    return best
