import math

import numpy as np
import pytest

from mdla import diagnostics as dg
from mdla.branching import BranchConfig, simulate_cluster
from mdla.kernels import j_kernel
from mdla.simcore import ModelConfig, run_with_initial_condition, \
    sandwich_profile
from mdla.unitstep import UnitStep


@pytest.fixture(scope="module")
def lattice(table01):
    return dg.get_j_lattice(table01, 200.0)


@pytest.fixture(scope="module")
def cascade_runs(table01):
    """Critical-cascade point configurations seeded by rate-alpha roots."""
    runs = []
    for seed in range(24):
        cfg = BranchConfig(alpha=0.1, roots=None, t0m=0.0, t0=150.0,
                           horizon=450.0, max_generation=200, seed=seed)
        runs.append(UnitStep(np.sort(simulate_cluster(cfg, table01).times)))
    return runs


def test_lattice_pointwise_matches_quadrature(table01, lattice):
    for s, u in ((1.0, 4.0), (3.0, 17.0), (10.0, 60.0), (25.0, 130.0)):
        assert lattice.j_at(s, u) == pytest.approx(
            j_kernel(table01, s, u), rel=0.02, abs=1e-7)


def test_lattice_row_integral(table01, lattice):
    """int_a^w J(a, b) db against direct quadrature."""
    a, w = 2.0, 80.0
    b = np.linspace(a + 1e-3, w, 2000)
    direct = np.trapezoid([j_kernel(table01, a, x) for x in b], b)
    assert float(lattice.row_integral(np.array([a]), w)[0]) == \
        pytest.approx(direct, rel=0.02, abs=1e-6)


def test_lattice_lebesgue_limit(table01):
    """alpha^2 * double Lebesgue integral of J over a wide window tends to
    -2 alpha / (1+2 alpha)^2."""
    lat = dg.get_j_lattice(table01, 2000.0)
    val = 0.01 * lat.lebesgue(2000.0)
    assert val == pytest.approx(-0.2 / 1.2 ** 2, rel=0.04)


def test_first_order_is_kernel_sum(table01):
    y = UnitStep(np.array([1.0, 4.0, 9.0]))
    t = 12.0
    direct = float(np.sum(table01.k_of(t - y.jumps)))
    assert dg.first_order(y, table01, 0.0, t) == pytest.approx(direct)
    assert dg.first_order(y, table01, 0.0, 0.5) == 0.0


def test_second_order_assembly_identity(table01, cascade_runs):
    """s2 is assembled from its reported components exactly."""
    terms = dg.second_order_terms(cascade_runs[0], table01, 0.0, 300.0)
    a, c = 0.1, 1.2
    rebuilt = 2 * a * a / c ** 2 + terms["s1"] / c ** 2 \
        + (a / c) * terms["j_term"]
    assert terms["s2"] == pytest.approx(rebuilt, rel=1e-12)
    assert terms["j_term"] == pytest.approx(
        terms["point_point"] + terms["point_ds"] + terms["ds_point"]
        + terms["lebesgue"], rel=1e-12)


def test_smoothed_speed_martingale_identity(table01, cascade_runs):
    """The increment of L equals kstar_limit times the compensated point
    count N - integral of S1 (exactly, up to table normalization)."""
    t_a, t_b = 250.0, 350.0
    for y in cascade_runs[:6]:
        dL = dg.smoothed_speed(y, table01, 0.0, t_b) \
            - dg.smoothed_speed(y, table01, 0.0, t_a)
        n_new = y.count_in(t_a + 1e-12, t_b)
        grid = np.linspace(t_a, t_b, 2001)
        s1 = dg._point_sum_series(y.jumps, 0.0, grid, table01.k_of)
        comp = np.trapezoid(s1, grid)
        assert dL == pytest.approx(table01.kstar_limit * (n_new - comp),
                                   abs=5e-3 * table01.kstar_limit
                                   * max(n_new, 1.0))


def test_speed_series_consistency(table01, cascade_runs):
    grid = np.linspace(100.0, 400.0, 13)
    ser = dg.speed_series(cascade_runs[0], table01, 0.0, t_grid=grid)
    assert ser.t.size == 13
    for j in (0, 6, 12):
        assert ser.S1[j] == pytest.approx(
            dg.first_order(cascade_runs[0], table01, 0.0, grid[j]))
        assert ser.L[j] == pytest.approx(
            dg.smoothed_speed(cascade_runs[0], table01, 0.0, grid[j]))
    assert np.all(np.isnan(ser.h))  # bare point process has no hazard


def test_increment_stats_shapes_and_pooling(table01, cascade_runs):
    cfg = dg.DiagConfig(alpha=0.1, t0m=0.0, t0=250.0, delta=50.0)
    out = dg.increment_stats(cascade_runs, table01, cfg, n_windows=3)
    assert out["increments"].shape == (len(cascade_runs), 3)
    assert out["n"] == 3 * len(cascade_runs)
    assert out["variance"] > 0
    assert out["predicted_variance"] == pytest.approx(4 * 0.1 ** 5 * 50.0)
    assert out["mean_ci"][0] < out["mean"] < out["mean_ci"][1]
    with pytest.raises(ValueError):
        dg.increment_stats(cascade_runs[:1], table01, cfg)


@pytest.fixture(scope="module")
def sandwich_runs():
    runs = []
    for seed in range(6):
        y0 = sandwich_profile("sandwich_lower", 0.05, 2000.0, seed=seed)
        cfg = ModelConfig(lam=1.0, T=2800.0, seed=seed, record_hazard=True)
        runs.append(run_with_initial_condition(y0, 2000.0, cfg))
    return runs


def test_first_order_tracks_hazard(table005, sandwich_runs):
    """Ensemble-and-time average of S1 past the burn-in stays near alpha."""
    vals = []
    for r in sandwich_runs:
        ser = dg.speed_series(r, table005, 0.0,
                              t_grid=np.linspace(2400.0, 2800.0, 81))
        vals.append(float(np.mean(ser.S1)))
    # per-run sd is about 0.023; six runs put the mean within ~0.03 of 0.05
    assert abs(np.mean(vals) - 0.05) < 0.035


def test_approximation_gap_diagnostics(table005, sandwich_runs):
    fracs, gaps = [], []
    for r in sandwich_runs:
        out = dg.approximation_gap(r, table005, 0.0, 2400.0, 2800.0)
        fracs.append(out["upper_subunit_fraction"])
        gaps.append(out["gap_integral"])
        assert out["t"].size == out["gap"].size == out["normalized"].size
    # pilot calibration: per-run subunit fraction ~0.94 (min 0.83),
    # gap integral over a 400-length window has q90 ~ 38
    assert np.mean(fracs) >= 0.85
    assert np.median(gaps) < 60.0
    with pytest.raises(ValueError):
        dg.approximation_gap(sandwich_runs[0], table005, 0.0, 0.0, 10.0)


@pytest.mark.xfail(
    strict=True,
    reason="the compensated double-integral term averages to 2*alpha^2 only "
           "through feedback correlations of the full aggregate at speeds "
           "far beyond desk scale; at reachable horizons its ensemble mean "
           "is small and negative")
def test_second_order_interaction_mean(table005):
    a, c = 0.05, 1.1
    vals = []
    for seed in range(40):
        cfg = BranchConfig(alpha=a, roots=None, t0m=0.0, t0=2000.0,
                           horizon=4500.0, max_generation=300, seed=seed)
        y = UnitStep(np.sort(simulate_cluster(cfg, table005).times))
        terms = dg.second_order_terms(y, table005, 0.0, 4400.0)
        vals.append((a / c) * terms["j_term"])
    vals = np.asarray(vals)
    sem = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 2 * a * a) <= 3 * sem
