import math

import numpy as np
import pytest
from scipy.stats import kstest

from mdla.simcore import (ModelConfig, run, run_coupled_pair,
                          run_with_initial_condition, sandwich_profile,
                          window_policy, x_bound, y_profile)
from mdla.unitstep import UnitStep


def test_x_bound_formula():
    assert x_bound(1e4) == math.ceil(1e3 * math.log(1e4) ** 2)
    assert x_bound(100.0) == math.ceil(100 ** 0.75 * math.log(100) ** 2)


def test_window_policy_monotone():
    assert window_policy(1e3, 1.0, 1e-2) <= window_policy(1e3, 1.0, 1e-4)
    assert window_policy(1e3, 1.0, 1e-3) <= window_policy(1e4, 1.0, 1e-3)
    with pytest.raises(ValueError):
        window_policy(1e3, 1.0, 2.0)


def test_run_is_deterministic():
    cfg = ModelConfig(lam=1.0, T=300.0, seed=42)
    a, b = run(cfg), run(cfg)
    assert np.array_equal(a.front_trajectory.jumps, b.front_trajectory.jumps)
    assert a.compensator_total == b.compensator_total
    c = run(ModelConfig(lam=1.0, T=300.0, seed=43))
    assert not np.array_equal(a.front_trajectory.jumps,
                              c.front_trajectory.jumps)


def test_empty_field_never_grows():
    r = run(ModelConfig(lam=0.0, T=100.0, seed=1))
    assert r.X_T == 0
    assert r.compensator_total == 0.0


def test_front_bound_and_bookkeeping():
    r = run(ModelConfig(lam=1.0, T=1000.0, seed=5))
    assert r.X_T <= x_bound(1000.0)
    assert r.X_T == r.front_trajectory.n_jumps
    assert r.hazard_at_absorption.size == r.X_T
    assert r.compensator_at_absorption.size == r.X_T
    assert np.all(np.diff(r.compensator_at_absorption) >= 0)
    assert r.truncation_bound_used <= 1e-2


def test_hazard_recording():
    r = run(ModelConfig(lam=1.0, T=200.0, seed=9, record_hazard=True,
                        hazard_grid=0.5))
    t, h = r.hazard
    assert t[0] == 0.0
    assert np.allclose(np.diff(t), 0.5)
    assert np.all(h >= 0)
    # hazard is half the count above the front, so steps are multiples of 1/2
    assert np.allclose(2 * h, np.round(2 * h))


def test_compensator_time_change_is_rate_one():
    incs = []
    for seed in range(12):
        r = run(ModelConfig(lam=1.0, T=2000.0, seed=100 + seed))
        comp = r.compensator_at_absorption
        if comp.size:
            incs.append(np.diff(np.concatenate([[0.0], comp])))
    pooled = np.concatenate(incs)
    assert kstest(pooled, "expon").pvalue > 1e-3


def test_sandwich_profiles():
    lo = sandwich_profile("sandwich_lower", 0.1, 500.0, seed=2)
    assert lo.tail_infinite_after is None
    assert np.all((lo.jumps >= 0) & (lo.jumps <= 500.0))
    hi = sandwich_profile("sandwich_upper", 0.2, 500.0, seed=2)
    assert hi.tail_infinite_after == pytest.approx(min(0.2 ** -3, 500.0))
    with pytest.raises(ValueError):
        sandwich_profile("lower", 0.1, 500.0)


def test_run_with_initial_condition_pastes_history():
    t0 = 300.0
    y0 = sandwich_profile("sandwich_lower", 0.1, t0, seed=8)
    cfg = ModelConfig(lam=1.0, T=600.0, seed=8, record_hazard=True)
    r = run_with_initial_condition(y0, t0, cfg)
    # prescribed history occupies [0, t0] with exactly y0's jump count
    assert r.X(t0) == y0.n_jumps
    assert r.t_start == t0
    assert r.hazard[0][0] == t0
    assert r.front_trajectory.n_jumps >= y0.n_jumps
    with pytest.raises(ValueError):
        run_with_initial_condition(y0, t0, ModelConfig(lam=1.0, T=200.0))


def test_y_profile_reverses_front():
    r = run(ModelConfig(lam=1.0, T=400.0, seed=3))
    t = 350.0
    y = y_profile(r, t)
    # Y_t(s) = X(t) - X(t - s)
    for s in (1.0, 10.0, 100.0):
        assert y(s) == r.X(t) - r.X(t - s)
    assert y.tail_infinite_after == t


def test_coupled_pair_domination():
    lo, hi = run_coupled_pair(0.5, 1.5, 200.0, 400, seed=4)
    grid = np.linspace(0.0, 200.0, 401)
    assert hi.dominates(lo, grid)
