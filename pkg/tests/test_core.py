import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustlab.core import (
    Dataset,
    NumericError,
    RngStream,
    UsageError,
    check_symmetric,
    top_eigenpair,
    weighted_mean,
    weighted_second_moment,
)


def test_weighted_mean_examples():
    assert np.allclose(weighted_mean([[1, 0], [0, 1]], [0.5, 0.5]), [0.5, 0.5])
    c = np.array([2.0, -3.0, 7.5])
    assert np.allclose(weighted_mean(np.tile(c, (5, 1)), [0.1, 0.2, 0.3, 0.2, 0.2]), c)
    assert weighted_mean([0.0, 3.0, 6.0], [0.5, 0.25, 0.25])[0] == pytest.approx(2.25, abs=1e-15)


def test_weighted_mean_length_mismatch():
    with pytest.raises(UsageError):
        weighted_mean([[1.0], [2.0]], [1.0])


def test_weighted_second_moment_examples():
    assert np.array_equal(weighted_second_moment(np.ones((4, 3)), np.full(4, 0.25), np.ones(3)), np.zeros((3, 3)))
    assert np.allclose(weighted_second_moment([-1.0, 1.0], [0.5, 0.5], [0.0]), [[1.0]])
    M = weighted_second_moment([[1, 0], [0, 2]], [0.5, 0.5], [0, 0])
    assert np.allclose(M, np.diag([0.5, 2.0]))


def test_weighted_second_moment_dimension_mismatch():
    with pytest.raises(UsageError):
        weighted_second_moment([[1.0, 2.0]], [1.0], [0.0])


def test_dataset_validation():
    assert Dataset([1.0, 2.0]).points.shape == (2, 1)
    with pytest.raises(UsageError):
        Dataset(np.zeros((0, 2)))
    with pytest.raises(UsageError):
        Dataset([[1.0, np.nan]])
    with pytest.raises(ValueError):
        Dataset([[1.0, 2.0]]).points[0, 0] = 3.0


def test_rng_stream_replay_and_independence():
    a = RngStream(7, 3).normal(size=5)
    b = RngStream(7, 3).normal(size=5)
    c = RngStream(7, 4).normal(size=5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert np.array_equal(RngStream(1).child(2).normal(size=3), RngStream(1).child(2).normal(size=3))
    assert not np.allclose(RngStream(1).child(2).normal(size=3), RngStream(1).child(3).normal(size=3))


def test_top_eigenpair_examples():
    lam, v = top_eigenpair(np.eye(3))
    assert lam == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)
    lam, v = top_eigenpair(np.diag([3.0, 1.0]))
    assert lam == pytest.approx(3.0, abs=1e-9)
    assert abs(abs(v[0]) - 1.0) < 1e-6
    lam, v = top_eigenpair(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert lam == pytest.approx(3.0, abs=1e-9)
    assert np.allclose(np.abs(v), np.full(2, 1 / np.sqrt(2)), atol=1e-6)


def test_top_eigenpair_small_gap():
    g = np.random.default_rng(3)
    Q, _ = np.linalg.qr(g.standard_normal((8, 8)))
    vals = np.array([1.0, 1.0 - 2e-4, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0])
    M = (Q * vals) @ Q.T
    lam, v = top_eigenpair(M, tol=1e-9)
    assert lam == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(M @ v - lam * v) <= 1e-9


def test_top_eigenpair_budget_exhaustion():
    g = np.random.default_rng(4)
    Q, _ = np.linalg.qr(g.standard_normal((6, 6)))
    M = (Q * np.array([1.0, 0.999999, 0.5, 0.2, 0.1, 0.0])) @ Q.T
    with pytest.raises(NumericError) as info:
        top_eigenpair(M, tol=1e-14, max_iter=3)
    assert np.isfinite(info.value.residual)


def test_check_symmetric_rejects():
    with pytest.raises(UsageError):
        check_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))


@st.composite
def _psd(draw):
    d = draw(st.integers(1, 10))
    seed = draw(st.integers(0, 2**32 - 1))
    g = np.random.default_rng(seed)
    A = g.standard_normal((d, d + 2)) * g.uniform(0.1, 5)
    return A @ A.T, seed


@given(_psd())
def test_top_eigenpair_beats_random_directions(case):
    M, seed = case
    lam, v = top_eigenpair(M, tol=1e-9)
    U = np.random.default_rng(seed + 1).standard_normal((10_000, M.shape[0]))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    quad = np.einsum("ij,jk,ik->i", U, M, U).max()
    assert quad <= lam + 1e-9 * max(lam, 1.0)
    assert np.linalg.norm(M @ v - lam * v) <= 1e-9 * max(lam, 1.0)
    assert lam == pytest.approx(np.linalg.eigvalsh(M)[-1], abs=1e-8 * max(lam, 1.0))


@given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_second_moment_psd_and_translation(n, d, seed):
    g = np.random.default_rng(seed)
    X = g.standard_normal((n, d)) * g.uniform(0.01, 100)
    w = g.dirichlet(np.ones(n))
    x = g.standard_normal(d)
    M = weighted_second_moment(X, w, x)
    assert np.linalg.eigvalsh(M)[0] >= -1e-10 * max(1.0, np.abs(M).max())
    b = g.standard_normal(d) * 10
    shifted = weighted_mean(X + b, w)
    assert np.allclose(shifted, weighted_mean(X, w) + b, rtol=0, atol=1e-12 * (1 + np.abs(X).max() + np.abs(b).max()))
