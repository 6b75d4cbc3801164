import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from mdla.limitproc import (LimitConfig, LimitPath, euler_general,
                            integrate_z, make_grid, sample_bessel_path,
                            z_path)
from mdla.stats import ks_two_sample


def test_config_validation():
    with pytest.raises(ValueError):
        LimitConfig(scheme="nope")
    with pytest.raises(ValueError):
        LimitConfig(s_max=-1.0)
    with pytest.raises(ValueError):
        LimitConfig(sigma2=-0.5)


def test_grid_shape():
    g = make_grid(2.0, 50)
    assert g[0] == 0.0
    assert g[-1] == pytest.approx(2.0)
    assert g.size == 51
    assert np.all(np.diff(g) > 0)


def test_exact_besq_mean_square():
    """E[V_s^2] = (8/3) s for the dimension-8/3 squared Bessel process."""
    cfg = LimitConfig(scheme="exact_besq", s_max=2.0, n_grid=40, seed=21,
                      n_paths=8000)
    path = sample_bessel_path(cfg)
    for j in (20, 40):
        s = path.times[j]
        v2 = path.V[:, j] ** 2
        sem = v2.std(ddof=1) / math.sqrt(v2.size)
        assert abs(v2.mean() - (8.0 / 3.0) * s) <= 4 * sem


def test_z_is_power_of_v():
    cfg = LimitConfig(scheme="exact_besq", s_max=1.0, n_grid=20, seed=5,
                      n_paths=50)
    p = z_path(sample_bessel_path(cfg))
    pos = p.V > 0
    assert np.allclose(p.Z[pos], (3.0 * p.V[pos]) ** (-2.0 / 3.0))
    assert np.all(np.isinf(p.Z[~pos]))


def test_euler_bessel_matches_exact_marginal():
    exact = sample_bessel_path(LimitConfig(scheme="exact_besq", s_max=1.0,
                                           n_grid=30, seed=31,
                                           n_paths=3000)).V[:, -1]
    euler = sample_bessel_path(LimitConfig(scheme="euler_bessel", s_max=1.0,
                                           n_grid=30, euler_dt=2e-3, seed=32,
                                           n_paths=3000)).V[:, -1]
    assert ks_two_sample(exact, euler)["pvalue"] > 0.01


def test_integral_of_z_analytic_mean():
    """E int_0^1 Z = (3/2) 3^{-2/3} 2^{-1/3} / Gamma(4/3).

    From self-similarity E[Z_s] = s^{-1/3} E[Z_1] and the Gamma(4/3, 2)
    law of the squared process at time 1.
    """
    target = 1.5 * 3.0 ** (-2.0 / 3.0) * 2.0 ** (-1.0 / 3.0) \
        / gamma_fn(4.0 / 3.0)
    cfg = LimitConfig(scheme="exact_besq", s_max=1.0, n_grid=240, seed=41,
                      n_paths=20_000)
    cum = integrate_z(z_path(sample_bessel_path(cfg))).cum_int[:, -1]
    sem = cum.std(ddof=1) / math.sqrt(cum.size)
    assert abs(cum.mean() - target) <= 4 * sem + 0.01 * target


def test_integral_grid_refinement():
    """Integrating the same Z paths on a 4x-coarser subgrid changes the
    functional by little (the quadrature, not the law, is being tested)."""
    cfg = LimitConfig(scheme="exact_besq", s_max=1.0, n_grid=240, seed=51,
                      n_paths=400)
    fine = integrate_z(z_path(sample_bessel_path(cfg)))
    idx = np.arange(0, fine.times.size, 4)
    if idx[-1] != fine.times.size - 1:
        idx = np.append(idx, fine.times.size - 1)
    coarse = integrate_z(LimitPath(times=fine.times[idx],
                                   Z=fine.Z[:, idx]))
    rel = np.abs(coarse.cum_int[:, -1] - fine.cum_int[:, -1]) \
        / fine.cum_int[:, -1]
    assert np.median(rel) < 0.02
    assert np.max(rel) < 0.2


def test_sigma_zero_ode_exact():
    cfg = LimitConfig(scheme="euler_z", s_max=1.0, n_grid=30, z0=2.0,
                      sigma2=0.0, seed=1, n_paths=1)
    p = euler_general(cfg)
    exact = (2.0 ** -3 + 12.0 * p.times) ** (-1.0 / 3.0)
    assert np.max(np.abs(p.Z[0] - exact)) < 1e-9


def test_euler_z_matches_exact_transformed_law():
    """sigma^2 = 1 reduces to the driftless law of Z = (3V)^{-2/3}."""
    z0 = 1.0
    exact_cfg = LimitConfig(scheme="exact_besq", s_max=0.2, n_grid=30,
                            z0=z0, seed=61, n_paths=2000)
    exact = z_path(sample_bessel_path(exact_cfg)).Z[:, -1]
    eul_cfg = LimitConfig(scheme="euler_z", s_max=0.2, n_grid=30, z0=z0,
                          sigma2=1.0, step_eta=5e-4, seed=62, n_paths=2000)
    eul = euler_general(eul_cfg).Z[:, -1]
    keep = np.isfinite(eul)
    assert keep.mean() > 0.99
    assert ks_two_sample(exact, eul[keep])["pvalue"] > 0.01


def test_explosion_dichotomy_small():
    frac = {}
    for sigma2, seed in ((3.0, 71), (1.0, 72)):
        cfg = LimitConfig(scheme="euler_z", s_max=1.0, n_grid=20, z0=1.0,
                          sigma2=sigma2, seed=seed, n_paths=400)
        p = euler_general(cfg)
        frac[sigma2] = float(np.mean(~np.isnan(p.exploded_at)))
    assert frac[3.0] > 0.1
    assert frac[1.0] < 0.02
    with pytest.raises(ValueError):
        euler_general(LimitConfig(scheme="euler_z", z0=math.inf))
