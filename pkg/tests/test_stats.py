import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdla.stats import fit_exponent, ks_two_sample, trajectory_matrix
from mdla.unitstep import UnitStep


def power_law_jumps(beta: float, c: float, t_max: float) -> np.ndarray:
    """Jump times of X_t = floor(c * t^beta): the k-th jump is at
    (k / c)^(1/beta)."""
    n = int(c * t_max ** beta)
    k = np.arange(1, n + 1)
    return (k / c) ** (1.0 / beta)


def test_trajectory_matrix_counts():
    trajs = [np.array([1.0, 2.0, 5.0]), UnitStep(np.array([3.0]))]
    X = trajectory_matrix(trajs, np.array([0.5, 2.0, 10.0]))
    assert np.array_equal(X, [[0, 2, 3], [0, 0, 1]])


@given(st.floats(min_value=0.5, max_value=0.9),
       st.floats(min_value=1.0, max_value=3.0))
@settings(max_examples=20, deadline=None)
def test_fit_recovers_exponent(beta, c):
    trajs = [power_law_jumps(beta, c, 2e4)] * 12
    fit = fit_exponent(trajs, 1000.0, 2e4, n_boot=50)
    assert fit.slope == pytest.approx(beta, abs=0.03)


def test_fit_scale_equivariance():
    base = power_law_jumps(0.66, 1.0, 2e4)
    a = fit_exponent([base] * 12, 100.0, 2e4, n_boot=50)
    # doubling every X_t means doubling the jump density in k, i.e. c -> 2c
    dbl = power_law_jumps(0.66, 2.0, 2e4)
    b = fit_exponent([dbl] * 12, 100.0, 2e4, n_boot=50)
    assert b.slope == pytest.approx(a.slope, abs=0.02)
    assert b.intercept == pytest.approx(a.intercept + np.log(2.0), abs=0.05)


def test_fit_bootstrap_ci_brackets_truth(rng):
    trajs = []
    for _ in range(40):
        jitter = rng.uniform(0.8, 1.25)
        trajs.append(power_law_jumps(2.0 / 3.0, jitter, 1e4))
    fit = fit_exponent(trajs, 100.0, 1e4)
    assert fit.ci[0] <= fit.slope <= fit.ci[1]
    assert fit.ci[0] <= 2.0 / 3.0 + 0.02
    assert fit.ci[1] >= 2.0 / 3.0 - 0.02
    assert fit.ci_half_width < 0.05


def test_fit_validation():
    t = [power_law_jumps(0.5, 1.0, 1e3)] * 12
    with pytest.raises(ValueError):
        fit_exponent(t[:5], 10.0, 1e3)
    with pytest.raises(ValueError):
        fit_exponent(t, 200.0, 1e3)
    with pytest.raises(ValueError):
        fit_exponent([np.array([900.0])] * 12, 10.0, 1e3)


def test_ks_two_sample(rng):
    a = rng.normal(size=3000)
    b = rng.normal(size=3000)
    c = rng.normal(loc=0.3, size=3000)
    assert ks_two_sample(a, b)["pvalue"] > 0.01
    assert ks_two_sample(a, c)["pvalue"] < 1e-6
    with pytest.raises(ValueError):
        ks_two_sample(a, [])
