import numpy as np
import pytest

from mdla.hitting import (certification_residual, estimate_J, estimate_K,
                          estimate_speed, hit_probability, verify_Dt_identity)
from mdla.kernels import j_kernel
from mdla.unitstep import UnitStep


def test_hit_probability_matches_identity():
    for alpha in (0.1, 0.3):
        r = hit_probability(alpha, 20_000, seed=7)
        assert abs(r["phat"] - r["truth"]) <= 4 * r["stderr"] \
            + r["bias_bound"]
        assert r["truth"] == pytest.approx(1.0 / (1.0 + 2.0 * alpha))


def test_certification_residual_decreases():
    r = [certification_residual(0.1, u) for u in (20, 40, 80)]
    assert r[0] > r[1] > r[2]
    assert certification_residual(0.1, 60) < 1e-4


def test_estimate_K_matches_table(table01):
    pts = np.array([1.0, 3.0, 8.0, 20.0, 40.0])
    est = estimate_K(0.1, pts, 200_000, seed=11)
    err = np.abs(est["khat"] - np.asarray(table01.k_of(pts)))
    assert np.all(err <= 4 * est["stderr"] + est["bias_bound"] + 1e-5)


def test_estimate_J_matches_quadrature(table01):
    # extra barrier jump at 2.0, tail threshold 6.0
    mc = estimate_J(0.1, 2.0, 6.0, 200_000, seed=13)
    quad = j_kernel(table01, 2.0, 6.0)
    assert abs(mc["jhat"] - quad) <= 4 * mc["stderr"] + mc["bias_bound"] \
        + 2e-4
    with pytest.raises(ValueError):
        estimate_J(0.1, 6.0, 2.0, 100)


def test_estimate_speed_extremes():
    # barrier infinite immediately: any walk survives, speed = 1/2
    r = estimate_speed(UnitStep.infinite(after=0.0), 1000, seed=3)
    assert r["shat"] == 0.5
    # infinite after a short lag with no jumps before it: survival needs the
    # walk to stay at or below 0, probability strictly inside (0, 1/2)
    r2 = estimate_speed(UnitStep.infinite(after=1.0), 4000, seed=3)
    assert 0.0 < r2["shat"] < 0.5


def test_conditional_decomposition_identity():
    out = verify_Dt_identity(0.1, 20.0, 4000, seed=5, n_y=3, n_grid=15)
    assert out["mean_abs_residual"] <= 5 * out["sigma"]
