"""Event-driven simulation of one-dimensional multi-particle DLA.

The aggregate occupies {0, ..., X}; free particles perform independent rate-1
continuous-time simple random walks on the sites above the front.  A left
jump from site X+1 freezes every particle at that site and advances the
front.  Only the right half-line is simulated (the two sides of the origin
evolve independently).

The simulation is kinetic Monte Carlo: one global exponential clock with
total rate equal to the number of active particles, a uniformly chosen
particle per event, and a fair direction coin.  The infinite initial field
is truncated to a moving window [front+1, front+margin]: sites exposed as
the front advances are populated from deterministic per-site counter-based
substreams (exact for Poisson initial data by stationarity of the i.i.d.
Poisson field), walkers reflect at the window's right edge (product-Poisson
is stationary for reflected walks, so the field law inside is preserved),
and the probability that the truncation affects the run is bounded by a
Gaussian-tail union bound reported in the RunRecord.

The front hazard h(t) = (count at site X_t + 1)/2 is the front's conditional
jump rate; its exact time integral (the compensator) is accumulated in
closed form between events, so time-change tests downstream use the exact
integral rather than a grid approximation.  Note that h conditions on the
full particle configuration, while the speed process proper conditions on
the front history only; they share the front's compensator, and diagnostics
treat h as the speed with that substitution flagged.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple

import numba as nb
import numpy as np

from .unitstep import UnitStep

__all__ = [
    "ModelConfig",
    "ParticleField",
    "RunRecord",
    "window_policy",
    "displacement_tail_bound",
    "init_field",
    "extend_window",
    "run",
    "run_with_initial_condition",
    "sandwich_profile",
    "y_profile",
    "run_coupled_pair",
]

# init-mode codes for the jitted kernels
_POISSON = 0
_DETERMINISTIC = 1
_GEOMETRIC = 2

_INIT_CODES = {"poisson": _POISSON, "deterministic": _DETERMINISTIC,
               "geometric": _GEOMETRIC}

# loop exit codes
_OK = 0
_RESOURCE = 1


@dataclass(frozen=True)
class ModelConfig:
    """Simulation configuration.

    Attributes:
        lam: particle density (mean initial count per site).
        init_mode: "poisson", "iid_counts", "sandwich_upper",
            "sandwich_lower" or "explicit".
        init_params: for "iid_counts": {"name": poisson|deterministic|
            geometric, ...}; for sandwich modes: {"alpha": a, "t0": t0};
            for "explicit": supplied through run_with_initial_condition.
        T: time horizon (absolute; sandwich/explicit runs simulate on
            [t0, T]).
        truncation_epsilon: probability budget for the window truncation.
        seed: 64-bit seed.
        record_hazard: record h(t) on a regular grid.
        hazard_grid: grid step for hazard recording.
    """

    lam: float
    T: float
    init_mode: str = "poisson"
    init_params: Optional[dict] = None
    truncation_epsilon: float = 1e-3
    seed: int = 0
    record_hazard: bool = False
    hazard_grid: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.T <= 0:
            raise ValueError("T must be > 0")
        if not 0 < self.truncation_epsilon < 1:
            raise ValueError("truncation_epsilon must lie in (0, 1)")
        if self.init_mode not in ("poisson", "iid_counts", "sandwich_upper",
                                  "sandwich_lower", "explicit"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if self.init_mode == "iid_counts":
            name = (self.init_params or {}).get("name")
            if name not in _INIT_CODES:
                raise ValueError(f"unknown iid_counts distribution {name!r}")
        if self.init_mode.startswith("sandwich"):
            p = self.init_params or {}
            a = p.get("alpha", -1.0)
            if not 0 < a < 0.5:
                raise ValueError("sandwich modes require 0 < alpha < 1/2")
            if not 0 < p.get("t0", -1.0) < self.T:
                raise ValueError("sandwich modes require 0 < t0 < T")
        if self.hazard_grid <= 0:
            raise ValueError("hazard_grid must be > 0")

    def _site_dist(self) -> Tuple[int, float]:
        """(code, parameter) of the per-site count distribution."""
        if self.init_mode in ("poisson", "sandwich_upper", "sandwich_lower",
                              "explicit"):
            return _POISSON, self.lam
        p = self.init_params
        name = p["name"]
        if name == "poisson":
            return _POISSON, p.get("lam", self.lam)
        if name == "deterministic":
            return _DETERMINISTIC, float(p.get("k", round(self.lam)))
        # geometric on {0,1,...} with mean q/(1-q) = lam
        q = self.lam / (1.0 + self.lam)
        return _GEOMETRIC, p.get("q", q)


@dataclass
class ParticleField:
    """Mutable simulator state restricted to the active window.

    counts[s] is the particle count at absolute site s for
    front < s <= wall; sites <= front belong to the aggregate.
    """

    counts: np.ndarray
    front: int
    wall: int
    frozen_mass: int
    t: float
    config: ModelConfig
    n_extensions: int = 0

    @property
    def active_particles(self) -> int:
        return int(self.counts[self.front + 1:self.wall + 1].sum())


@dataclass
class RunRecord:
    """One seeded run: front trajectory, hazard series and bookkeeping."""

    front_trajectory: UnitStep
    hazard: Optional[Tuple[np.ndarray, np.ndarray]]
    hazard_at_absorption: np.ndarray
    compensator_at_absorption: np.ndarray
    compensator_total: float
    n_events: int
    n_window_extensions: int
    truncation_bound_used: float
    seed: int
    config: ModelConfig
    t_start: float = 0.0
    prescribed_until: Optional[float] = None
    prescribed_infinite_before: Optional[float] = None
    frozen_mass: int = 0
    total_instantiated: int = 0

    @property
    def X_T(self) -> int:
        return self.front_trajectory.n_jumps

    def X(self, t: float) -> float:
        """Front position at time t (counts jumps at or before t)."""
        return float(np.searchsorted(self.front_trajectory.jumps, t,
                                     side="right"))

    def save(self, prefix: str) -> None:
        """Write <prefix>.json (metadata), <prefix>_front.csv and, when
        recorded, <prefix>_hazard.csv."""
        meta = {
            "config": asdict(self.config),
            "seed": self.seed,
            "n_events": self.n_events,
            "n_window_extensions": self.n_window_extensions,
            "truncation_bound_used": self.truncation_bound_used,
            "compensator_total": self.compensator_total,
            "t_start": self.t_start,
            "X_T": self.X_T,
            "frozen_mass": self.frozen_mass,
            "total_instantiated": self.total_instantiated,
        }
        with open(prefix + ".json", "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
        jumps = self.front_trajectory.jumps
        n_pre = jumps.size - self.hazard_at_absorption.size
        comp = np.concatenate([np.full(n_pre, np.nan),
                               self.compensator_at_absorption])
        hz = np.concatenate([np.full(n_pre, np.nan),
                             self.hazard_at_absorption])
        arr = np.column_stack([jumps, comp, hz])
        np.savetxt(prefix + "_front.csv", arr, delimiter=",",
                   header="absorption_time,compensator,hazard_before",
                   comments="")
        if self.hazard is not None:
            np.savetxt(prefix + "_hazard.csv",
                       np.column_stack(self.hazard), delimiter=",",
                       header="t,h", comments="")


def displacement_tail_bound(T: float, d: float) -> float:
    """Bound on P(max displacement of a rate-1 walk over [0,T] >= d).

    A Gaussian tail exp(-d^2 / (2T)) with a conservative union prefactor T.
    """
    if d <= 0:
        return 1.0
    return min(1.0, T * math.exp(-d * d / (2.0 * T)))


def x_bound(T: float) -> int:
    """A-priori front bound ceil(T^{3/4} log^2 T) (valid for T >= e)."""
    return math.ceil(T ** 0.75 * math.log(max(T, math.e)) ** 2)


def _margin(T: float, lam: float, eps_w: float) -> int:
    """Smallest margin m with sum_{d>=m} lam * tail(d) <= eps_w."""
    if lam == 0:
        return 1
    m = 1
    while True:
        # geometric-style summation of the tail bound from m
        total = 0.0
        d = m
        while True:
            term = lam * displacement_tail_bound(T, d)
            total += term
            if term < eps_w * 1e-6 or total > eps_w:
                break
            d += 1
        if total <= eps_w:
            return m
        # jump ahead proportionally to how far off we are
        m = max(m + 1, int(m * 1.1))


def window_policy(T: float, lam: float, eps_w: float) -> int:
    """Static wall for horizon T: X_bound + the smallest safe margin.

    The margin m is the smallest integer with
    sum_{d >= m} lam * P(max displacement over [0,T] >= d) <= eps_w,
    using the Gaussian-tail union bound of displacement_tail_bound.
    """
    if not 0 < eps_w < 1:
        raise ValueError("eps_w must lie in (0, 1)")
    return x_bound(T) + _margin(T, lam, eps_w)


def _moving_margin(T: float, lam: float, eps_w: float) -> int:
    """Margin for the moving window: the per-particle tail budget is split
    over the ~lam*T instantiated-site slots, i.e. the smallest m with
    lam * T * exp(-m^2/(2T)) <= eps_w / (lam * T)."""
    if lam == 0:
        return 1
    target = eps_w / max(lam * T, 1.0)
    m = math.sqrt(max(2.0 * T * math.log(max(lam * T, 1.0) / target), 1.0))
    return max(4, math.ceil(m))


@nb.njit(inline="always")
def _splitmix64(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(-1)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) \
        & np.uint64(-1)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) \
        & np.uint64(-1)
    z = z ^ (z >> np.uint64(31))
    return state, z


@nb.njit(cache=True)
def _site_count(seed, site, dist_code, dist_param):
    """Deterministic count for (seed, site) from a splitmix64 substream."""
    if dist_code == _DETERMINISTIC:
        return int(round(dist_param))
    state = np.uint64(seed) ^ (np.uint64(site) * np.uint64(0xD1342543DE82EF95))
    state, z = _splitmix64(state)
    if dist_code == _GEOMETRIC:
        u = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        if dist_param <= 0.0:
            return 0
        # P(Z = k) = (1-q) q^k
        return int(math.log(max(u, 1e-300)) / math.log(dist_param))
    # Poisson via Knuth's product of uniforms (dist_param is modest here)
    limit = math.exp(-dist_param)
    k = 0
    p = 1.0
    while True:
        state, z = _splitmix64(state)
        u = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        p *= u
        if p <= limit:
            return k
        k += 1


@nb.njit(cache=True)
def _kmc_loop(lam, T, margin, seed, dist_code, dist_param,
              record_hazard, grid_step,
              cap_sites, cap_particles, cap_abs):
    """Moving-window kinetic Monte Carlo loop on relative time [0, T].

    Returns (status, t, front, wall, frozen_mass, total_instantiated,
    n_events, n_extensions, counts, n_abs, abs_times, comp_at_abs,
    h_at_abs, n_grid_filled, grid_h, comp_total).
    """
    counts = np.zeros(cap_sites, dtype=np.int64)
    pos = np.empty(cap_particles, dtype=np.int64)
    n_act = 0
    front = 0
    wall = 0
    frozen_mass = 0
    total_inst = 0
    n_ext = 0
    n_events = 0

    abs_times = np.empty(cap_abs, dtype=np.float64)
    comp_at_abs = np.empty(cap_abs, dtype=np.float64)
    h_at_abs = np.empty(cap_abs, dtype=np.float64)
    n_abs = 0

    n_grid = int(T / grid_step) + 1 if record_hazard else 1
    grid_h = np.zeros(n_grid, dtype=np.float64)
    g = 0  # next grid index to fill; grid time = g * grid_step

    # event stream: splitmix64 counter generator (fast, 64-bit seeded),
    # decoupled from the per-site population substreams by a fixed tweak
    rng_state = np.uint64(seed) ^ np.uint64(0x6A09E667F3BCC909)
    inv53 = 1.0 / 9007199254740992.0

    # initial window
    status = _OK
    while wall < margin:
        wall += 1
        c = _site_count(seed, wall, dist_code, dist_param)
        counts[wall] = c
        if n_act + c > cap_particles:
            status = _RESOURCE
            break
        for _ in range(c):
            pos[n_act] = wall
            n_act += 1
        total_inst += c

    t = 0.0
    comp = 0.0
    h = counts[front + 1] * 0.5
    while status == _OK:
        if n_act == 0:
            # empty field: nothing happens up to T
            if record_hazard:
                while g < n_grid:
                    grid_h[g] = 0.0
                    g += 1
            t = T
            break
        rng_state, z = _splitmix64(rng_state)
        u = (z >> np.uint64(11)) * inv53
        dt = -math.log(1.0 - u) / n_act
        t_next = t + dt
        if record_hazard:
            while g < n_grid and g * grid_step <= min(t_next, T):
                grid_h[g] = h
                g += 1
        if t_next >= T:
            comp += h * (T - t)
            t = T
            break
        comp += h * dt
        t = t_next
        n_events += 1

        rng_state, z = _splitmix64(rng_state)
        v = ((z >> np.uint64(11)) * inv53) * n_act
        i = int(v)
        if i >= n_act:
            i = n_act - 1
        site = pos[i]
        # direction from the high-precision fractional part of the pick
        if (v - i) < 0.5:
            # right step; the moving wall reflects (a blocked attempt is a
            # null event, which keeps the product-Poisson field stationary
            # and confines the error to beyond-margin particles already
            # covered by the truncation budget)
            if site < wall:
                counts[site] -= 1
                counts[site + 1] += 1
                pos[i] = site + 1
                if site == front + 1:
                    h = counts[site] * 0.5
        else:
            # left step
            if site == front + 1:
                # absorption: the front grows and site's occupants freeze
                if n_abs >= cap_abs:
                    status = _RESOURCE
                    break
                abs_times[n_abs] = t
                comp_at_abs[n_abs] = comp
                h_at_abs[n_abs] = h
                n_abs += 1
                front += 1
                frozen_mass += counts[site]
                counts[site] = 0
                k = 0
                while k < n_act:
                    if pos[k] == site:
                        n_act -= 1
                        pos[k] = pos[n_act]
                    else:
                        k += 1
                # keep the moving window ahead of the front
                while wall < front + margin:
                    wall += 1
                    n_ext += 1
                    if wall >= cap_sites:
                        status = _RESOURCE
                        break
                    c = _site_count(seed, wall, dist_code, dist_param)
                    counts[wall] = c
                    if n_act + c > cap_particles:
                        status = _RESOURCE
                        break
                    for _ in range(c):
                        pos[n_act] = wall
                        n_act += 1
                    total_inst += c
                if status != _OK:
                    break
                h = counts[front + 1] * 0.5
            else:
                counts[site] -= 1
                counts[site - 1] += 1
                pos[i] = site - 1
                if site - 1 == front + 1:
                    h = counts[site - 1] * 0.5

    return (status, t, front, wall, frozen_mass, total_inst, n_events,
            n_ext, counts, n_abs, abs_times, comp_at_abs, h_at_abs, g,
            grid_h, comp)


def init_field(config: ModelConfig) -> ParticleField:
    """Populate the initial window for the given configuration.

    Sites 1..wall0 get i.i.d. counts per the init_mode marginal, drawn from
    deterministic per-site counter substreams of config.seed, so that
    init_field and run agree on the initial data.
    """
    dist_code, dist_param = config._site_dist()
    wall0 = _moving_margin(config.T, max(config.lam, 1e-12),
                           config.truncation_epsilon)
    counts = np.zeros(wall0 + 1, dtype=np.int64)
    for s in range(1, wall0 + 1):
        counts[s] = _site_count(config.seed, s, dist_code, dist_param)
    return ParticleField(counts=counts, front=0, wall=wall0, frozen_mass=0,
                         t=0.0, config=config)


def extend_window(field: ParticleField, new_wall: int) -> None:
    """Populate sites wall+1..new_wall i.i.d. per the init marginal.

    Exact for Poisson initial data by stationarity; for other initial laws
    the new sites use the time-0 marginal, an approximation flagged through
    RunRecord.n_window_extensions on full runs.
    """
    if new_wall <= field.wall:
        raise ValueError("new_wall must exceed the current wall")
    cfg = field.config
    dist_code, dist_param = cfg._site_dist()
    grown = np.zeros(new_wall + 1, dtype=np.int64)
    grown[:field.counts.size] = field.counts
    for s in range(field.wall + 1, new_wall + 1):
        grown[s] = _site_count(cfg.seed, s, dist_code, dist_param)
    field.counts = grown
    field.n_extensions += new_wall - field.wall
    field.wall = new_wall


def _run_core(config: ModelConfig, T_rel: float):
    """Execute the KMC loop on [0, T_rel] and collect raw outputs."""
    lam = config.lam
    dist_code, dist_param = config._site_dist()
    margin = _moving_margin(T_rel, max(lam, 1e-12),
                            config.truncation_epsilon)
    cap_x = int(max(lam, 1.0) * T_rel / 2 + 12 * math.sqrt(
        max(lam, 1.0) * T_rel + 1) + 64)
    cap_sites = cap_x + margin + 4
    mean_inst = (lam if dist_code != _DETERMINISTIC else dist_param) \
        * cap_sites
    cap_particles = int(mean_inst + 12 * math.sqrt(mean_inst + 1) + 256)
    out = _kmc_loop(lam, T_rel, margin, config.seed, dist_code, dist_param,
                    config.record_hazard, config.hazard_grid,
                    cap_sites, cap_particles, cap_x + 4)
    return out, margin


def run(config: ModelConfig) -> RunRecord:
    """Simulate one seeded run and return its RunRecord.

    Sandwich init modes delegate to run_with_initial_condition with the
    matching prescribed history.  Identical (config, seed) produce identical
    records.
    """
    if config.init_mode.startswith("sandwich"):
        p = config.init_params
        y0 = sandwich_profile(config.init_mode, p["alpha"], p["t0"],
                              seed=config.seed)
        return run_with_initial_condition(y0, p["t0"], config)
    (status, t, front, wall, frozen, total_inst, n_events, n_ext, _counts,
     n_abs, abs_times, comp_at_abs, h_at_abs, n_grid, grid_h, comp), \
        margin = _run_core(config, config.T)
    if status != _OK:
        raise MemoryError("window/particle capacity exhausted "
                          f"(front={front}, wall={wall})")
    bound = total_inst * displacement_tail_bound(config.T, margin - 1)
    hazard = None
    if config.record_hazard:
        grid_t = np.arange(n_grid) * config.hazard_grid
        hazard = (grid_t, grid_h[:n_grid])
    return RunRecord(
        front_trajectory=UnitStep(abs_times[:n_abs].copy()),
        hazard=hazard,
        hazard_at_absorption=h_at_abs[:n_abs].copy(),
        compensator_at_absorption=comp_at_abs[:n_abs].copy(),
        compensator_total=float(comp),
        n_events=int(n_events),
        n_window_extensions=int(n_ext),
        truncation_bound_used=float(min(bound, 1.0)),
        seed=config.seed,
        config=config,
        frozen_mass=int(frozen),
        total_instantiated=int(total_inst),
    )


def sandwich_profile(mode: str, alpha: float, t0: float,
                     seed: int = 0) -> UnitStep:
    """Reversed initial profile Y0 for the sandwich initial conditions.

    The lower profile is a rate-alpha Poisson history over the full past
    [0, t0] (finite everywhere, speed exactly alpha); the upper profile is
    rate-alpha over lags up to alpha^-3 and infinite beyond (realized via
    the unit-step infinite tail).
    """
    rng = np.random.default_rng(np.uint64(seed) ^ np.uint64(0xA5A5A5A5))
    if mode == "sandwich_lower":
        lag_max = t0
        tail = None
    elif mode == "sandwich_upper":
        lag_max = min(alpha ** -3, t0)
        tail = lag_max
    else:
        raise ValueError(f"not a sandwich mode: {mode!r}")
    n = rng.poisson(alpha * lag_max)
    jumps = np.sort(rng.uniform(0.0, lag_max, size=n))
    return UnitStep(jumps, tail_infinite_after=tail)


def run_with_initial_condition(Y0: UnitStep, t0: float,
                               config: ModelConfig) -> RunRecord:
    """Evolve the generalized aggregate with prescribed history before t0.

    Y0 is the reversed profile at t0 (jump at lag s = an absorption at
    absolute time t0 - s); it is realized as a synthetic front trajectory
    consumed by the speed diagnostics, while growth after t0 is driven by a
    fresh simulated particle field of density config.lam on [t0, config.T].
    """
    if config.T <= t0:
        raise ValueError("config.T must exceed t0")
    if Y0.tail_infinite_after is not None and Y0.tail_infinite_after > t0:
        raise ValueError("Y0 tail extends before time 0")
    prescribed = np.sort(t0 - Y0.jumps[Y0.jumps <= t0])
    inf_before = None
    if Y0.tail_infinite_after is not None:
        inf_before = t0 - Y0.tail_infinite_after
    T_rel = config.T - t0
    (status, t, front, wall, frozen, total_inst, n_events, n_ext, _counts,
     n_abs, abs_times, comp_at_abs, h_at_abs, n_grid, grid_h, comp), \
        margin = _run_core(config, T_rel)
    if status != _OK:
        raise MemoryError("window/particle capacity exhausted")
    own = abs_times[:n_abs] + t0
    all_jumps = np.concatenate([prescribed, own])
    bound = total_inst * displacement_tail_bound(T_rel, margin - 1)
    hazard = None
    if config.record_hazard:
        grid_t = np.arange(n_grid) * config.hazard_grid + t0
        hazard = (grid_t, grid_h[:n_grid])
    return RunRecord(
        front_trajectory=UnitStep(all_jumps),
        hazard=hazard,
        hazard_at_absorption=h_at_abs[:n_abs].copy(),
        compensator_at_absorption=comp_at_abs[:n_abs].copy(),
        compensator_total=float(comp),
        n_events=int(n_events),
        n_window_extensions=int(n_ext),
        truncation_bound_used=float(min(bound, 1.0)),
        seed=config.seed,
        config=config,
        t_start=t0,
        prescribed_until=t0,
        prescribed_infinite_before=inf_before,
        frozen_mass=int(frozen),
        total_instantiated=int(total_inst),
    )


def y_profile(record: RunRecord, t: float) -> UnitStep:
    """Reversed-time profile Y_t(s) = X_t - X_{t-s} of a run at time t.

    The tail is infinite after s = t for a plain run; a generalized run
    carries its prescribed infinite tail instead.
    """
    if t > record.config.T:
        raise ValueError("t beyond the run horizon")
    jumps = record.front_trajectory.jumps
    sel = jumps[(jumps > 0) & (jumps <= t)]
    lags = np.sort(t - sel)
    tail = t
    if record.prescribed_infinite_before is not None:
        tail = t - record.prescribed_infinite_before
    lags = lags[lags < tail]
    return UnitStep(lags, tail_infinite_after=tail)


@nb.njit(cache=True)
def _coupled_pair_loop(T, counts1, counts2, n_steps_cap, seed):
    """Shared-noise domination coupling of two fields with counts1 <= counts2.

    Every particle k (shared index across both systems) owns one pre-assigned
    walk: jump times from a rate-1 clock and fair direction coins, generated
    on demand from a per-particle splitmix64 substream.  Particles present
    only in the denser system get indices beyond the sparse system's.  Each
    system freezes its own copy of a particle independently; the driving
    noise (paths) is identical.

    Returns (front1 trajectory, front2 trajectory) as arrays of jump times.
    """
    n_sites = counts1.shape[0]
    # flatten particles: system 2 holds everyone, system 1 a prefix subset
    total2 = 0
    for s in range(n_sites):
        total2 += counts2[s]
    home = np.empty(total2, dtype=np.int64)
    in1 = np.empty(total2, dtype=np.uint8)
    idx = 0
    for s in range(n_sites):
        for j in range(counts2[s]):
            home[idx] = s
            in1[idx] = 1 if j < counts1[s] else 0
            idx += 1
    # per-particle event schedule: next jump time and rng state
    state = np.empty(total2, dtype=np.uint64)
    t_next = np.empty(total2, dtype=np.float64)
    pos1 = np.empty(total2, dtype=np.int64)
    pos2 = np.empty(total2, dtype=np.int64)
    alive1 = np.empty(total2, dtype=np.uint8)
    alive2 = np.empty(total2, dtype=np.uint8)
    for k in range(total2):
        st = np.uint64(seed) ^ (np.uint64(k) * np.uint64(0x9E3779B97F4A7C15))
        st, z = _splitmix64(st)
        u = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        state[k] = st
        t_next[k] = -math.log(max(u, 1e-300))
        pos1[k] = home[k]
        pos2[k] = home[k]
        alive1[k] = in1[k]
        alive2[k] = 1
    front1 = 0
    front2 = 0
    jumps1 = np.empty(n_sites, dtype=np.float64)
    jumps2 = np.empty(n_sites, dtype=np.float64)
    n1 = 0
    n2 = 0
    steps = 0
    while steps < n_steps_cap:
        # next event over all still-relevant particles
        kmin = -1
        tmin = T
        for k in range(total2):
            if (alive1[k] or alive2[k]) and t_next[k] < tmin:
                tmin = t_next[k]
                kmin = k
        if kmin < 0:
            break
        steps += 1
        k = kmin
        st, z = _splitmix64(state[k])
        right = (z & np.uint64(1)) == np.uint64(1)
        st, z2 = _splitmix64(st)
        u = (z2 >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        state[k] = st
        t_now = t_next[k]
        t_next[k] = t_now - math.log(max(u, 1e-300))
        step = 1 if right else -1
        for sysid in range(2):
            alive = alive1 if sysid == 0 else alive2
            pos = pos1 if sysid == 0 else pos2
            if not alive[k]:
                continue
            site = pos[k]
            new = site + step
            front = front1 if sysid == 0 else front2
            if new > front:
                pos[k] = new
                if new >= n_sites:
                    alive[k] = 0  # walked off the truncated field
            else:
                # absorption: freeze everyone at `site`
                if sysid == 0:
                    front1 += 1
                    jumps1[n1] = t_now
                    n1 += 1
                    for kk in range(total2):
                        if alive[kk] and pos[kk] == site:
                            alive[kk] = 0
                else:
                    front2 += 1
                    jumps2[n2] = t_now
                    n2 += 1
                    for kk in range(total2):
                        if alive[kk] and pos[kk] == site:
                            alive[kk] = 0
    return jumps1[:n1], jumps2[:n2]


def run_coupled_pair(lam1: float, lam2: float, T: float, n_sites: int,
                     seed: int = 0):
    """Couple two small static-window runs with densities lam1 <= lam2 on
    shared driving noise (per-particle pre-assigned walks).

    The denser field contains the sparser one (Poisson superposition), and
    every shared particle follows the identical path in both systems, so the
    denser front dominates pathwise.  Intended for the domination invariant
    at small scale; the window is static with n_sites sites and walkers
    leaving it are dropped.

    Returns:
        (UnitStep, UnitStep): front trajectories of the two systems.
    """
    if lam1 > lam2:
        raise ValueError("need lam1 <= lam2")
    rng = np.random.default_rng(seed)
    c1 = rng.poisson(lam1, size=n_sites)
    c2 = c1 + rng.poisson(lam2 - lam1, size=n_sites)
    c1[0] = c2[0] = 0  # site 0 is the aggregate origin
    j1, j2 = _coupled_pair_loop(T, c1, c2, 50_000_000, seed)
    return UnitStep(np.sort(j1)), UnitStep(np.sort(j2))
