"""Growth-exponent fitting and distributional comparison helpers.

fit_exponent regresses log mean front size on log time over a log-spaced
grid and bootstraps the slope over trajectories; ks_two_sample wraps the
standard two-sample Kolmogorov-Smirnov test.  Both are deliberately plain:
continuous functionals are compared with KS (no binning choices) and power
laws with least squares on log-log axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.stats import ks_2samp

from .simcore import RunRecord
from .unitstep import UnitStep

__all__ = ["FitResult", "fit_exponent", "ks_two_sample", "trajectory_matrix"]


@dataclass(frozen=True)
class FitResult:
    """Least-squares power-law fit with a bootstrap confidence interval."""

    slope: float
    intercept: float
    ci: Tuple[float, float]
    t_min: float
    t_max: float
    n_trajectories: int

    @property
    def ci_half_width(self) -> float:
        return 0.5 * (self.ci[1] - self.ci[0])


def _as_jumps(traj) -> np.ndarray:
    if isinstance(traj, RunRecord):
        return traj.front_trajectory.jumps
    if isinstance(traj, UnitStep):
        return traj.jumps
    return np.asarray(traj, dtype=np.float64)


def trajectory_matrix(trajectories: Sequence, t_grid: np.ndarray
                      ) -> np.ndarray:
    """X_t of each trajectory at each grid time (rows: trajectories).

    Trajectories may be RunRecords, UnitSteps, or sorted jump-time arrays.
    """
    out = np.empty((len(trajectories), t_grid.size))
    for i, traj in enumerate(trajectories):
        jumps = _as_jumps(traj)
        out[i] = np.searchsorted(jumps, t_grid, side="right")
    return out


def fit_exponent(trajectories: Sequence, t_min: float, t_max: float,
                 n_grid: int = 20, n_boot: int = 400,
                 seed: int = 0) -> FitResult:
    """Fit the growth exponent of E[X_t] ~ t^slope over [t_min, t_max].

    Least squares of log mean(X_t) against log t on a log-spaced grid;
    the confidence interval is the 2.5-97.5% bootstrap percentile range
    over trajectory resampling.  Scale-equivariant: rescaling every X_t by
    a constant shifts only the intercept.

    Raises:
        ValueError: fewer than 10 trajectories, t_max/t_min < 10, or a
            zero ensemble mean somewhere in the range (log undefined).
    """
    if len(trajectories) < 10:
        raise ValueError("need at least 10 trajectories")
    if t_max / t_min < 10.0:
        raise ValueError("need t_max / t_min >= 10")
    t_grid = np.geomspace(t_min, t_max, n_grid)
    X = trajectory_matrix(trajectories, t_grid)
    mean = X.mean(axis=0)
    if np.any(mean <= 0):
        raise ValueError("zero mean front size inside the fit range")
    lt = np.log(t_grid)
    slope, intercept = np.polyfit(lt, np.log(mean), 1)
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        m = X[idx].mean(axis=0)
        m = np.maximum(m, 1e-300)
        boots[b] = np.polyfit(lt, np.log(m), 1)[0]
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return FitResult(slope=float(slope), intercept=float(intercept),
                     ci=(float(lo), float(hi)), t_min=t_min, t_max=t_max,
                     n_trajectories=n)


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> dict:
    """Two-sample KS statistic with the asymptotic p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    res = ks_2samp(a, b, method="asymp")
    return {"statistic": float(res.statistic), "pvalue": float(res.pvalue),
            "n_a": int(a.size), "n_b": int(b.size)}
