"""Samplers for the limiting diffusion Z and its time integral.

The scaling limit of the critical front is driven by Z = (3V)^{-2/3} where V
is a Bessel process of dimension 8/3 (dV = (5/6) dt / V + dB) started at 0;
Z solves dZ = 2 Z^{5/2} dB and is (-1/3)-self-similar, and the limiting
front functional is the running integral of Z.  The primary sampler uses the
exact transition of the squared process (noncentral chi-square mixture), so
path marginals at grid points carry no discretization bias; Euler schemes
exist for cross-checks and for the generalized SDE

    dZ = (4 sigma^2 - 4) Z^4 dt + 2 sigma Z^{5/2} dB

(for which no exact transition is available; sigma^2 = 1 removes the drift,
sigma^2 >= 2 explodes in finite time, sigma^2 < 2 tends to 0).  The
generalized integrator splits the step: the polynomial drift is applied by
its exact flow Z -> (Z^{-3} + (12 - 12 sigma^2) dt)^{-1/3} around an
Euler-Maruyama diffusion step, which makes the sigma = 0 ODE exact and
leaves the sigma^2 = 1 case a plain Euler-Maruyama scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba as nb
import numpy as np

__all__ = [
    "LimitConfig",
    "LimitPath",
    "make_grid",
    "sample_bessel_path",
    "z_path",
    "integrate_z",
    "euler_general",
]

_BESSEL_DIM = 8.0 / 3.0


@dataclass(frozen=True)
class LimitConfig:
    """Limit-process sampling configuration.

    Attributes:
        scheme: "exact_besq", "euler_bessel" or "euler_z".
        s_max: horizon.
        n_grid: number of positive grid points (geometric near zero).
        first_cell: first positive grid time (default s_max * 1e-6).
        z0: initial Z (math.inf means start the Bessel process at V = 0).
        sigma2: generalized-SDE sigma^2 (used by euler_general / euler_z).
        euler_dt: internal step for euler_bessel.
        step_eta: adaptive step factor for euler_general (dt ~ eta * Z^-3).
        z_cap: explosion threshold for euler_general.
        seed: RNG seed.
        n_paths: ensemble size.
    """

    scheme: str = "exact_besq"
    s_max: float = 1.0
    n_grid: int = 240
    first_cell: Optional[float] = None
    z0: float = math.inf
    sigma2: float = 1.0
    euler_dt: float = 1e-3
    step_eta: float = 2e-3
    z_cap: float = 1e9
    seed: int = 0
    n_paths: int = 1

    def __post_init__(self):
        if self.scheme not in ("exact_besq", "euler_bessel", "euler_z"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.s_max <= 0:
            raise ValueError("s_max must be > 0")
        if self.first_cell is not None and self.first_cell <= 0:
            raise ValueError("first grid step must be > 0")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")


@dataclass
class LimitPath:
    """Discretized ensemble of (V, Z, integral-of-Z) paths.

    Arrays have shape (n_paths, n_times); V or Z may be None when the
    corresponding stage has not been filled.  Z(0) is +inf when started from
    V = 0 (flag value, excluded from all quadrature).
    """

    times: np.ndarray
    V: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    cum_int: Optional[np.ndarray] = None
    exploded_at: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        for a in (self.V, self.Z):
            if a is not None:
                return a.shape[0]
        return 0


def make_grid(s_max: float, n_grid: int, first_cell: Optional[float] = None
              ) -> np.ndarray:
    """Time grid {0} + geometric from first_cell to s_max."""
    if first_cell is None:
        first_cell = s_max * 1e-6
    pos = np.geomspace(first_cell, s_max, n_grid)
    return np.concatenate([[0.0], pos])


def sample_bessel_path(config: LimitConfig) -> LimitPath:
    """Sample V (Bessel dimension 8/3) on the grid.

    exact_besq: steps the squared process by its exact transition
    X_{t+s} = s * chi'^2(8/3, X_t / s), realized as a Poisson mixture of
    central chi-squares, so grid marginals are exact.
    euler_bessel: Euler steps of dV = (5/6) dt / V + dB at config.euler_dt
    with a reflection guard at 0.
    """
    if config.scheme == "euler_z":
        raise ValueError("euler_z does not produce V paths")
    rng = np.random.default_rng(config.seed)
    times = make_grid(config.s_max, config.n_grid, config.first_cell)
    n = config.n_paths
    if math.isinf(config.z0):
        v0 = 0.0
    else:
        v0 = (config.z0 ** -1.5) / 3.0  # V = Z^{-3/2} / 3
    if config.scheme == "exact_besq":
        V = np.empty((n, times.size))
        x = np.full(n, v0 * v0)
        V[:, 0] = v0
        for j in range(1, times.size):
            dt = times[j] - times[j - 1]
            lam = x / dt
            nmix = rng.poisson(lam / 2.0)
            x = dt * rng.chisquare(_BESSEL_DIM + 2.0 * nmix)
            V[:, j] = np.sqrt(x)
        return LimitPath(times=times, V=V)
    # euler_bessel on a uniform internal grid, sampled onto `times`
    V = np.empty((n, times.size))
    V[:, 0] = v0
    v = np.full(n, v0)
    t = 0.0
    j = 1
    dt0 = config.euler_dt
    while j < times.size:
        dt = min(dt0, times[j] - t)
        drift = (5.0 / 6.0) * dt / np.maximum(v, math.sqrt(dt))
        noise = math.sqrt(dt) * rng.standard_normal(n)
        vn = v + drift + noise
        bad = vn <= 0
        if np.any(bad):
            # retry the bad paths with a halved step, twice, then reflect
            for _ in range(2):
                h = dt / 2
                vb = v[bad]
                for _half in range(2):
                    vb = vb + (5.0 / 6.0) * h / np.maximum(
                        vb, math.sqrt(h)) + math.sqrt(h) * \
                        rng.standard_normal(vb.size)
                    vb = np.abs(vb)
                vn[bad] = vb
                break
            vn = np.abs(vn)
        v = vn
        t += dt
        if t >= times[j] - 1e-15:
            V[:, j] = v
            j += 1
    return LimitPath(times=times, V=V)


def z_path(path: LimitPath) -> LimitPath:
    """Fill Z = (3V)^{-2/3} pointwise (+inf where V = 0)."""
    if path.V is None:
        raise ValueError("V paths not filled")
    with np.errstate(divide="ignore"):
        z = np.where(path.V > 0, (3.0 * path.V) ** (-2.0 / 3.0), np.inf)
    path.Z = z
    return path


def integrate_z(path: LimitPath) -> LimitPath:
    """Fill the running integral of Z along each path.

    Trapezoid on the (geometric) grid; the first cell [0, t1], where Z blows
    up like c * x^{-1/3}, is integrated in closed form with c fitted from
    the first two positive grid points of the same path.
    """
    if path.Z is None:
        raise ValueError("Z paths not filled")
    t = path.times
    if t[0] != 0.0:
        raise ValueError("grid must start at 0")
    z = path.Z
    n, m = z.shape
    cum = np.zeros((n, m))
    # pathwise local fit Z ~ c x^{-1/3} on the first cell
    c = 0.5 * (z[:, 1] * t[1] ** (1.0 / 3.0) + z[:, 2] * t[2] ** (1.0 / 3.0))
    cum[:, 1] = 1.5 * c * t[1] ** (2.0 / 3.0)
    dt = np.diff(t[1:])
    inc = 0.5 * (z[:, 1:-1] + z[:, 2:]) * dt
    cum[:, 2:] = cum[:, 1][:, None] + np.cumsum(inc, axis=1)
    path.cum_int = cum
    return path


@nb.njit(cache=True)
def _euler_general_loop(z0, sigma2, times, eta, z_cap, n_paths, seed):
    np.random.seed(seed & 0x7FFFFFFF)
    m = times.shape[0]
    Z = np.empty((n_paths, m))
    exploded = np.full(n_paths, np.nan)
    a = 12.0 - 12.0 * sigma2  # drift flow: d(Z^-3)/dt = a
    sig = math.sqrt(sigma2)
    for p in range(n_paths):
        z = z0
        t = 0.0
        Z[p, 0] = z
        j = 1
        dead = False
        while j < m:
            if dead:
                Z[p, j] = np.inf if exploded[p] == exploded[p] else z
                j += 1
                continue
            dt = eta / (z * z * z)
            if t + dt > times[j]:
                dt = times[j] - t
            if dt <= 1e-300:
                dt = 1e-300
            # half drift (exact flow), Euler diffusion, half drift
            if a != 0.0:
                w = z ** -3.0 + a * (dt / 2)
                if w <= 0.0:
                    z = z_cap
                else:
                    z = w ** (-1.0 / 3.0)
            if sig > 0.0 and z < z_cap:
                z = z + 2.0 * sig * z ** 2.5 * math.sqrt(dt) * \
                    np.random.standard_normal()
                if z <= 0.0:
                    z = -z if z < 0.0 else 1e-12
            if a != 0.0 and z < z_cap:
                w = z ** -3.0 + a * (dt / 2)
                if w <= 0.0:
                    z = z_cap
                else:
                    z = w ** (-1.0 / 3.0)
            t += dt
            if z >= z_cap:
                exploded[p] = t
                dead = True
                continue
            if t >= times[j] - 1e-15:
                Z[p, j] = z
                j += 1
    return Z, exploded


def euler_general(config: LimitConfig) -> LimitPath:
    """Integrate dZ = (4 sigma^2 - 4) Z^4 dt + 2 sigma Z^{5/2} dB.

    Adaptive step dt ~ step_eta * Z^-3 (the local timescale); drift applied
    through its exact flow around the Euler-Maruyama diffusion step, so the
    sigma = 0 ODE is reproduced to machine precision and sigma^2 = 1 is the
    plain driftless Euler-Maruyama scheme.  Z >= z_cap marks the path
    exploded at that time (Z = +inf thereafter).  Keep z_cap large: a
    non-exploding (sigma^2 < 2) path still visits any finite level b with
    probability ~ (z0/b)^{1 - 1/sigma^2} by the scale-function identity, so a
    low cap misreports those excursions as explosions.
    """
    if math.isinf(config.z0):
        raise ValueError("euler_general needs a finite z0")
    times = make_grid(config.s_max, config.n_grid, config.first_cell)
    # start the grid at z0's own scale: drop the 0 point, euler starts at t=0
    times[0] = 0.0
    Z, exploded = _euler_general_loop(config.z0, config.sigma2, times,
                                      config.step_eta, config.z_cap,
                                      config.n_paths, config.seed)
    return LimitPath(times=times, Z=Z, exploded_at=exploded)
