import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdla.unitstep import UnitStep

times_strategy = st.lists(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False,
              allow_infinity=False),
    min_size=0, max_size=40, unique=True)


@given(times_strategy, st.floats(min_value=-10.0, max_value=1e6 + 10,
                                 allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_value_counts_jumps_strictly_before(times, s):
    y = UnitStep.from_times(times)
    assert y(s) == sum(1 for t in times if t < s)


@given(times_strategy)
@settings(max_examples=100, deadline=None)
def test_monotone_and_left_continuous(times):
    y = UnitStep.from_times(times)
    grid = np.linspace(-1.0, 1e6 + 1, 257)
    vals = y(grid)
    assert np.all(np.diff(vals) >= 0)
    # left continuity: value at a jump time excludes that jump
    for t in times:
        assert y(t) == sum(1 for u in times if u < t)


@given(st.lists(st.integers(min_value=0, max_value=10 ** 6), unique=True,
                max_size=40),
       st.integers(min_value=-800, max_value=800))
@settings(max_examples=100, deadline=None)
def test_shift_equivariance(ticks, dt_ticks):
    # integer-backed times keep jumps distinct under the shift
    times = [t * 0.375 for t in ticks]
    dt = dt_ticks * 0.125
    y = UnitStep.from_times(times)
    ys = y.shifted(dt)
    grid = np.linspace(0.0, 1e6, 63)
    assert np.array_equal(ys(grid + dt), y(grid))


def test_validation_rejects_unsorted_and_redundant_tail():
    with pytest.raises(ValueError):
        UnitStep(np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        UnitStep(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        UnitStep(np.array([5.0]), tail_infinite_after=3.0)


def test_infinite_tail():
    y = UnitStep.infinite(after=2.0)
    assert y(2.0) == 0.0
    assert y(2.5) == np.inf
    z = UnitStep(np.array([0.5, 1.0]), tail_infinite_after=1.5)
    assert z(1.2) == 2.0
    assert z(1.6) == np.inf


def test_count_in_closed_interval():
    y = UnitStep(np.array([1.0, 2.0, 3.0]))
    assert y.count_in(1.0, 3.0) == 3
    assert y.count_in(1.5, 2.5) == 1
    assert y.count_in(3.5, 9.0) == 0


def test_dominates():
    grid = np.linspace(0.0, 10.0, 101)
    lo = UnitStep(np.array([2.0, 5.0]))
    hi = UnitStep(np.array([1.0, 4.0, 6.0]))
    assert hi.dominates(lo, grid)
    assert not lo.dominates(hi, grid)
