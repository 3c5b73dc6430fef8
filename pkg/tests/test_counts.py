import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bgindex.counts import (
    ABSOLUTE,
    NEGATIVE,
    POSITIVE,
    TailCountCurve,
    count_increments,
    count_true_jumps,
    exceedance_counts,
    tail_curve,
)
from bgindex.simulate import JUMP_RESOLVED, IncrementSeries, ModelSpec, SamplingScheme, integrated_tail, simulate_path
from bgindex.stable import StableLaw

import oracles

X = [0.5, -1.2, 0.05, 0.41]
finite = st.floats(-10, 10, allow_nan=False)


@pytest.mark.parametrize("side,expected", [(ABSOLUTE, 3), (POSITIVE, 2), (NEGATIVE, 1)])
def test_small_example(side, expected):
    assert count_increments(X, 0.4, side) == expected


def test_strict_inequality():
    assert count_increments([0.4, -0.4], 0.4) == 0


def test_empty_series():
    assert count_increments(np.array([]), 0.1) == 0
    assert count_increments(IncrementSeries(0.1, np.array([])), 0.1) == 0


def test_series_object_accepted():
    assert count_increments(IncrementSeries(0.01, np.array(X)), 0.4) == 3


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_threshold_must_be_positive(bad):
    with pytest.raises(ValueError):
        count_increments(X, bad)


def test_unknown_side():
    with pytest.raises(ValueError):
        count_increments(X, 0.1, "both")


def test_single_threshold_curve():
    c = tail_curve(X, [0.4])
    assert len(c) == 1 and c.counts[0] == count_increments(X, 0.4)


@pytest.mark.parametrize("side", [ABSOLUTE, POSITIVE, NEGATIVE])
def test_curve_matches_brute_force(side):
    rng = np.random.default_rng(0)
    x = rng.standard_t(2, 2000)
    u = np.sort(rng.uniform(0.01, 5, 30))
    c = tail_curve(x, u, side)
    assert c.counts.tolist() == oracles.brute_counts(x, u, side)
    assert np.all(np.diff(c.counts) <= 0)


def test_exceedance_counts_any_order():
    x = np.array(X)
    assert exceedance_counts(x, [1.0, 0.1, 0.45]).tolist() == [1, 3, 2]


def test_curve_validation():
    with pytest.raises(ValueError):
        tail_curve(X, [0.2, 0.1])
    with pytest.raises(ValueError):
        TailCountCurve([0.1, 0.2], [1, -1])
    with pytest.raises(ValueError):
        TailCountCurve([0.1, 0.2], [1])


@settings(max_examples=60, deadline=None)
@given(x=arrays(float, st.integers(0, 50), elements=finite), u=st.floats(1e-3, 5))
def test_absolute_is_positive_plus_negative(x, u):
    assert count_increments(x, u) == count_increments(x, u, POSITIVE) + count_increments(x, u, NEGATIVE)


@settings(max_examples=60, deadline=None)
@given(x=arrays(float, st.integers(0, 50), elements=finite),
       u=st.lists(st.floats(1e-3, 5), min_size=1, max_size=8, unique=True))
def test_curve_nonincreasing(x, u):
    c = tail_curve(x, sorted(u))
    assert np.all(np.diff(c.counts) <= 0)


# ----------------------------------------------------------------------------
# recorded jumps


def test_true_jump_example():
    rec = np.array([[0.1, 0.5], [0.2, -0.3], [0.3, 0.1]])
    assert count_true_jumps(rec, 0.25) == 2
    assert count_true_jumps(rec, 0.6) == 0


def test_true_jumps_below_floor():
    rec = np.array([[0.1, 0.5]])
    with pytest.raises(ValueError, match="floor"):
        count_true_jumps(rec, 0.01, floor=0.05)
    x = IncrementSeries(0.1, np.zeros(1), rec, floor=0.05)
    with pytest.raises(ValueError):
        count_true_jumps(x, 0.01)
    with pytest.raises(ValueError):
        count_true_jumps(IncrementSeries(0.1, np.zeros(1)), 0.1)


def test_true_jump_mean_matches_integrated_tail():
    m, s, u = ModelSpec(components=(StableLaw(1.2, 2.0),)), SamplingScheme(1.0, 1e-3), 0.05
    mu = integrated_tail(m, u, 1.0)
    n = [count_true_jumps(simulate_path(m, s, JUMP_RESOLVED, seed=r, floor=1e-2), u) for r in range(100)]
    assert abs(np.mean(n) - mu) < 3 * math.sqrt(mu / 100)


def test_true_jump_fluctuation_variance_is_scale_free():
    # u^(beta/2) (V(u) - mean) has variance a for every u, so it stays flat along a ladder
    law = StableLaw(1.5, 1.0)
    m = ModelSpec(components=(law,))
    variances = []
    for delta in (1e-3, 1e-4, 1e-5):
        u = delta ** (2 / 11)
        mu = integrated_tail(m, u, 1.0)
        z = [u ** 0.75 * (count_true_jumps(simulate_path(m, SamplingScheme(1.0, delta), JUMP_RESOLVED,
                                                                 seed=r, floor=1e-3), u) - mu)
             for r in range(50)]
        variances.append(np.var(z, ddof=1))
    assert max(variances) / min(variances) < 2.0
    assert all(v == pytest.approx(1.0, rel=0.6) for v in variances)
