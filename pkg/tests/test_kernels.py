import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc
from scipy.stats import kstest

from mdla.kernels import (KernelParams, KernelTable, _upper_gamma,
                          build_kernel_table, drift_integrals, fit_envelope,
                          j_kernel, j_kernel_lattice, moments, phi,
                          renewal_convolution, table_moments,
                          table_transform)


def test_params_constants():
    p = KernelParams(0.1)
    assert p.xi == pytest.approx(1.0 / 1.2)
    assert p.kstar_limit == pytest.approx(0.02 / 1.2)
    assert p.s0 == pytest.approx(math.sqrt(1.2) - 1.1)
    with pytest.raises(ValueError):
        KernelParams(0.75)


@given(st.floats(min_value=0.01, max_value=0.5),
       st.floats(min_value=0.0, max_value=5.0))
@settings(max_examples=60, deadline=None)
def test_phi_derivatives_match_moments(alpha, s_off):
    """-phi'(0)/phi(0) etc. match the closed-form moments (finite
    differences of the analytic transform at a point left of the cut)."""
    s = -KernelParams(alpha).s0 + 0.1 + s_off  # safely right of the cut...
    h = 1e-5 * max(1.0, s)
    vals = np.array([phi(alpha, s - h), phi(alpha, s), phi(alpha, s + h)])
    assert np.allclose(vals.imag, 0.0, atol=1e-12)
    d1 = (vals[2].real - vals[0].real) / (2 * h)
    # derivative of the transform is -E[t e^{-st}]; just check monotone
    assert d1 < 0.0


def test_phi_at_zero_is_one():
    assert phi(0.1, 0.0) == pytest.approx(1.0)
    assert phi(0.3, 0.0) == pytest.approx(1.0)


def test_table_moments_match_closed_forms(table01):
    m = table_moments(table01)
    ref = moments(0.1)
    assert m["m0"] == pytest.approx(1.0, abs=1e-3)
    assert m["m1"] == pytest.approx(ref["m1"], rel=5e-3)
    assert m["m2"] == pytest.approx(ref["m2"], rel=5e-3)
    assert m["d1"] == pytest.approx(ref["d1"], rel=5e-3)
    assert m["d2"] == pytest.approx(ref["d2"], rel=5e-3)


def test_table_transform_matches_analytic(table01):
    for s in (0.05, 0.2, 1.0):
        assert table_transform(table01, s) == pytest.approx(
            phi(0.1, s).real, rel=1e-3, abs=1e-6)


def test_kstar_limit_reached(table01):
    lim = table01.kstar_limit
    assert table01.kstar_of(table01.t_tail) == pytest.approx(lim, rel=1e-4)
    assert table01.kstar_of(1e9) == lim


def test_renewal_convolution_oracle(table01):
    x, conv = renewal_convolution(table01, 50.0, h=0.02)
    pts = np.linspace(1.0, 49.0, 25)
    diff = np.abs(np.asarray(table01.kstar_of(pts)) - np.interp(pts, x, conv))
    assert diff.max() < 1e-4


def test_cdf_fbar_consistency(table01):
    t = np.linspace(0.0, 3 * table01.t_tail, 200)
    cdf = np.asarray(table01.cdf_of(t))
    fbar = np.asarray(table01.fbar_of(t))
    assert np.all(np.diff(cdf) >= -1e-12)
    assert np.allclose(cdf + fbar, table01.total_mass, atol=1e-9)
    assert table01.total_mass == pytest.approx(1.0, abs=1e-3)


def test_sampling_matches_cdf(table01, rng):
    draws = table01.sample(rng, 20_000)
    res = kstest(draws, lambda x: np.asarray(table01.cdf_of(x))
                 / table01.total_mass)
    assert res.pvalue > 0.01
    assert draws.mean() == pytest.approx(moments(0.1)["m1"], rel=0.05)


def test_j_kernel_against_lattice(table01):
    s_vals = np.array([0.5, 2.0, 7.5])
    u_vals = np.array([3.0, 11.0, 30.0])
    lat = j_kernel_lattice(table01, s_vals, u_vals)
    for i, s in enumerate(s_vals):
        for j, u in enumerate(u_vals):
            if s < u:
                assert lat[i, j] == pytest.approx(
                    j_kernel(table01, s, u), rel=2e-3, abs=1e-8)


def test_j_kernel_rejects_bad_order(table01):
    with pytest.raises(ValueError):
        j_kernel(table01, 5.0, 2.0)


def test_j_total_integral(table01):
    """The full double integral of J over 0 < s < u equals
    -2 / (alpha (1+2 alpha)^2)."""
    a = 0.1
    u = np.unique(np.concatenate([np.linspace(0.001, 20.0, 800),
                                  np.geomspace(20.0, 4000.0, 600)]))
    s_frac = np.linspace(0.0, 1.0, 240)
    inner = np.empty(u.size)
    for j, uu in enumerate(u):
        s = s_frac * uu
        row = j_kernel_lattice(table01, s[:-1], np.array([uu]))[:, 0]
        # close the row at s = u with the continuous limit of J there
        row = np.append(row, -2.0 * float(table01.k_of(uu))
                        / (1 + 2 * a) ** 2)
        inner[j] = np.trapezoid(row, s)
    total = np.trapezoid(inner, u)
    assert total == pytest.approx(-2.0 / (a * (1 + 2 * a) ** 2), rel=2e-2)


def test_envelope_fit_bounds_table(table01):
    env = fit_envelope(table01)
    assert env["c_K"] > 0
    g, k = table01.grid, table01.k
    bound = env["C_K"] * 0.1 * np.exp(-env["c_K"] * 0.01 * g) \
        / np.sqrt(g + 1.0)
    # a least-squares fit is not a strict majorant; the shape must hold
    # within a small uniform factor across five decades of decay
    assert np.all(k <= 3.0 * bound + 1e-12)


def test_drift_integrals_deterministic_and_decreasing(table01, table005):
    d1 = drift_integrals(table01)
    d2 = drift_integrals(table01)
    assert d1.I1 == d2.I1 and d1.I2 == d2.I2
    assert d1.error_estimate < 1e-2
    dev_005 = abs(sum([drift_integrals(table005).I1,
                       drift_integrals(table005).I2]) - 2.0)
    t002 = build_kernel_table(0.02)
    dev_002 = abs(drift_integrals(t002).I1 + drift_integrals(t002).I2 - 2.0)
    assert dev_002 < dev_005
    with pytest.raises(ValueError):
        drift_integrals(table01, T=1.0)


def test_table_roundtrip(tmp_path, table01):
    prefix = str(tmp_path / "tab")
    table01.to_files(prefix)
    back = KernelTable.from_files(prefix)
    assert back.alpha == table01.alpha
    assert np.allclose(back.k, table01.k)
    assert np.allclose(back.kstar, table01.kstar)
    assert back.t_tail == table01.t_tail


@given(st.floats(min_value=0.2, max_value=6.0).filter(
           lambda a: abs(a - 0.5) > 1e-3),
       st.floats(min_value=0.5, max_value=30.0))
@settings(max_examples=60, deadline=None)
def test_upper_gamma_recurrence(a, x):
    """Gamma(a+1, x) = a Gamma(a, x) + x^a e^{-x} for the shifted-negative
    branch used by the tail formulas."""
    lhs = _upper_gamma(a - 0.5, x)  # may hit the recurrence branch
    rhs = (_upper_gamma(a + 0.5, x) - x ** (a - 0.5) * math.exp(-x)) \
        / (a - 0.5)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-14)


def test_upper_gamma_positive_matches_scipy():
    for a in (0.5, 1.5, 2.0):
        for x in (0.1, 1.0, 10.0):
            assert _upper_gamma(a, x) == pytest.approx(
                gammaincc(a, x) * gamma_fn(a), rel=1e-12)
