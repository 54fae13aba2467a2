import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustlab import _pykernels as py
from robustlab import kernels

ck = pytest.importorskip("robustlab._ckernels")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@given(st.integers(1, 300), st.integers(1, 8), st.integers(0, 2**32 - 1), st.booleans())
def test_spread_value_grad_agree(n, d, seed, ties):
    g = np.random.default_rng(seed)
    Z = g.standard_normal((n, d))
    if ties:
        Z = np.round(Z, 1)
    u = g.standard_normal(d)
    w = g.random(n)
    a = py.spread_value_grad(Z, u, w)
    b = ck.spread_value_grad(Z, u, w)
    assert a[0] == pytest.approx(b[0], rel=1e-12, abs=1e-12)
    assert np.allclose(a[1], b[1], rtol=1e-11, atol=1e-11)


@given(st.integers(1, 20), st.integers(1, 200), st.integers(0, 2**32 - 1))
def test_spread_values_agree(m, n, seed):
    g = np.random.default_rng(seed)
    P = g.standard_normal((m, n))
    w = g.random(n)
    assert np.allclose(py.spread_values(P, w), ck.spread_values(P, w), rtol=1e-12, atol=1e-12)


@given(st.integers(1, 20), st.integers(1, 100), st.integers(0, 2**32 - 1))
def test_capped_min_rows_agree(m, n, seed):
    g = np.random.default_rng(seed)
    A = g.standard_normal((m, n))
    k = int(g.integers(0, n + 1))
    cap = 1.0 / max(k, 1)
    resid = g.uniform(0, cap) if k < n else 0.0
    assert np.allclose(py.capped_min_rows(A, k, cap, resid), ck.capped_min_rows(A, k, cap, resid), rtol=1e-12, atol=1e-12)


@given(st.integers(1, 400), st.floats(0.0, 0.49), st.integers(0, 2**32 - 1), st.sampled_from([1e-4, 1e-2, 1.0, 10.0]))
def test_project_capped_agree(n, rho, seed, scale):
    g = np.random.default_rng(seed)
    y = g.standard_normal(n) * scale
    cap = 1.0 / ((1.0 - rho) * n)
    a = py.project_capped(y, cap)
    b = ck.project_capped(y, cap)
    assert np.allclose(a, b, rtol=0, atol=1e-12)
    for w in (a, b):
        assert abs(w.sum() - 1.0) <= 1e-12
        assert w.min() >= 0.0 and w.max() <= cap


def test_project_capped_is_projection():
    # optimality: y - w is constant on the free coordinates
    g = np.random.default_rng(9)
    for impl in (py, ck):
        for _ in range(50):
            n = int(g.integers(3, 80))
            cap = 1.0 / (0.7 * n)
            y = g.standard_normal(n) / n
            w = impl.project_capped(y, cap)
            free = (w > 1e-12) & (w < cap - 1e-12)
            if free.sum() >= 2:
                r = (y - w)[free]
                assert np.ptp(r) <= 1e-12


@given(st.integers(1, 14), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_cube_kernels_agree(nbits, p, seed):
    g = np.random.default_rng(seed)
    ind = (g.random(1 << nbits) < g.uniform(0, 0.3)).astype(np.uint8)
    assert np.array_equal(py.dilate_once(ind, nbits), ck.dilate_once(ind, nbits))
    assert py.cube_mass(ind, nbits, p) == pytest.approx(ck.cube_mass(ind, nbits, p), rel=1e-12, abs=1e-15)
