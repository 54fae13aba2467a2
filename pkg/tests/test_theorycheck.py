import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustlab.contamination import CleanSampleSpec
from robustlab.core import RngStream, UsageError
from robustlab.theorycheck import (
    CubeSet,
    binomial_anticoncentration_check,
    binomial_sweep,
    dilate,
    hamming_blowup_exact,
    high_prob_from_robust,
)


def _popcount(x):
    return bin(x).count("1")


def test_full_cube():
    rep = hamming_blowup_exact(CubeSet.full(6), 0.2)
    assert rep.mass_S == pytest.approx(1.0) and rep.mass_S_eps == pytest.approx(1.0)
    assert rep.holds


def test_single_point_ball():
    rep = hamming_blowup_exact(CubeSet.from_points(4, [0]), 0.25)
    assert rep.radius == 1
    assert rep.mass_S == pytest.approx(1 / 16)
    assert rep.mass_S_eps == pytest.approx(5 / 16, abs=1e-15)
    assert rep.holds


def test_cube_usage_errors():
    with pytest.raises(UsageError):
        CubeSet.full(21)
    with pytest.raises(UsageError):
        hamming_blowup_exact(CubeSet(3, np.zeros(8)), 0.1)
    with pytest.raises(UsageError):
        CubeSet(3, np.zeros(7))


@given(st.integers(1, 9), st.floats(0.1, 0.9), st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_dilation_matches_distance_oracle(n, p, seed, radius):
    g = np.random.default_rng(seed)
    pts = [int(x) for x in np.flatnonzero(g.random(1 << n) < 0.1)] or [0]
    S = CubeSet.from_points(n, pts, p)
    D = dilate(S, radius)
    for x in range(1 << n):
        near = min(_popcount(x ^ s) for s in pts) <= radius
        assert bool(D.indicator[x]) == near
    mass = sum(p ** _popcount(x) * (1 - p) ** (n - _popcount(x)) for x in pts)
    assert S.mass == pytest.approx(mass, rel=1e-12)


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_blowup_monotone(n, seed):
    S = CubeSet.random_with_mass(n, RngStream(seed), target=0.5)
    prev = S.mass
    for j in range(0, n + 1):
        rep = hamming_blowup_exact(S, j / n)
        assert rep.mass_S_eps >= prev - 1e-15
        prev = rep.mass_S_eps
    assert np.all(dilate(S, 1).indicator >= S.indicator)


def test_random_sets_reach_mass():
    for i in range(20):
        S = CubeSet.random_with_mass(10, RngStream(i), p=0.3)
        assert S.mass >= 0.9 - 1e-12
        for j in range(1, 4):
            assert hamming_blowup_exact(S, j / 10).holds


def test_binomial_examples():
    r = binomial_anticoncentration_check(10, 0.5, 0.0)
    assert r.exact_tail == pytest.approx(638 / 1024, abs=1e-15)
    assert r.bound == pytest.approx(1 / math.sqrt(20))
    assert r.holds
    r = binomial_anticoncentration_check(10, 0.5, 0.1)
    assert r.threshold == 6
    assert r.exact_tail == pytest.approx(386 / 1024, abs=1e-15)
    assert r.bound == pytest.approx(math.exp(-0.4) / math.sqrt(20), rel=1e-12)
    assert r.holds
    r = binomial_anticoncentration_check(5, 0.5, 0.5)
    assert r.exact_tail == pytest.approx(1 / 32)
    assert r.bound == pytest.approx(math.exp(-5) / math.sqrt(10), rel=1e-12)
    assert r.holds


def test_binomial_exact_rationals():
    r = binomial_anticoncentration_check(7, Fraction(3, 10), Fraction(1, 10))
    k0 = math.ceil(Fraction(7 * 4, 10))
    tail = sum(Fraction(math.comb(7, k)) * Fraction(3, 10) ** k * Fraction(7, 10) ** (7 - k) for k in range(k0, 8))
    assert r.exact_tail == float(tail)
    assert not r.integral_threshold
    # 0.1 is read as one tenth: 10 * (0.5 + 0.1) = 6 exactly
    assert binomial_anticoncentration_check(10, 0.5, 0.1).integral_threshold


def test_binomial_usage_errors():
    with pytest.raises(UsageError):
        binomial_anticoncentration_check(1001, 0.5, 0.1)
    with pytest.raises(UsageError):
        binomial_anticoncentration_check(10, 0.8, 0.3)
    with pytest.raises(UsageError):
        binomial_anticoncentration_check(10, 1.0, 0.0)


def test_binomial_sweep_grid_size():
    reps = binomial_sweep(3)
    per_n = sum(sum(1 for j in range(21) if k / 10 + j / 20 <= 1 + 1e-12) for k in range(1, 10))
    assert len(reps) == 3 * per_n


def test_binomial_violations_confined_to_fractional_thresholds():
    # every failure of the literal inequality sits at a non-integral n (p + eps)
    bad = [r for r in binomial_sweep(50) if not r.holds]
    assert all(not r.integral_threshold for r in bad)
    assert all(r.n <= 9 for r in bad)


def test_high_prob_empirical_mean_generous():
    spec = CleanSampleSpec("gaussian", 50, 3)
    tab = high_prob_from_robust("empirical_mean", spec, 0.1, (50, 100), 50, envelope_C=10.0, rng=RngStream(1))
    assert tab.failures == (0, 0)
    assert tab.rates == (0.0, 0.0)


def test_high_prob_unknown_estimator():
    with pytest.raises(UsageError):
        high_prob_from_robust("oracle", CleanSampleSpec(), 0.1, (10, 20), 5)


def test_high_prob_pareto_filter_beats_empirical_mean():
    spec = CleanSampleSpec("pareto", 50, 5, shape=2.5)
    grid = (50, 100, 200, 400)
    emp = high_prob_from_robust("empirical_mean", spec, 0.1, grid, 60, envelope_C=0.7, rng=RngStream(1))
    fil = high_prob_from_robust("filter", spec, 0.1, grid, 60, envelope_C=0.7, rng=RngStream(1))
    assert sum(fil.failures) < sum(emp.failures)
    assert emp.failures[-1] <= emp.failures[0]
