"""The acceptance suite: fourteen numbered end-to-end checks.

Each criterion is a self-contained numerical experiment with a hard
pass/fail verdict at a stated tolerance; run_acceptance executes them in
order, shares the expensive simulation ensembles between criteria, and
reports one line per criterion.  Everything is seeded and deterministic.

Criterion 6 (the drift-integral normalization I1 + I2 = 2 + O(sqrt(alpha)))
is asserted faithfully even though the band check fails at desk-scale alpha:
the exact finite-T reduction carries a -8 alpha^3 T / (1+2a)^4 term that the
asymptotic statement suppresses, and |I1+I2-2| at the evaluation horizon
sits at ~15-19 sqrt(alpha) instead of <= 5 sqrt(alpha).  The decreasing-in-
alpha half of the criterion passes; the band half is reported as the honest
failure it is.
"""
from __future__ import annotations

import filecmp
import glob
import json
import math
import os
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import kstest

from . import diagnostics as dg
from .branching import BranchConfig, pgf_survival, simulate_cluster
from .harness import (limit_integral_samples, run_experiment,
                      simulate_ensemble)
from .hitting import estimate_J, estimate_K, hit_probability
from .kernels import (build_kernel_table, drift_integrals, fit_envelope,
                      j_kernel, j_kernel_lattice, renewal_convolution,
                      table_moments)
from .limitproc import (LimitConfig, euler_general, sample_bessel_path,
                        z_path)
from .simcore import x_bound
from .stats import fit_exponent, ks_two_sample, trajectory_matrix
from .unitstep import UnitStep

__all__ = ["CriterionResult", "AcceptanceSuite", "run_acceptance"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} [{self.number:2d}] {self.name}: {self.detail} "
                f"({self.elapsed:.1f}s)")

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name,
                "passed": self.passed, "detail": self.detail,
                "elapsed": self.elapsed}


class AcceptanceSuite:
    """Shared-ensemble runner for the fourteen acceptance criteria."""

    # J-envelope constant |J| <= C exp(-c a^2 u) / sqrt((s+1)(u+1)),
    # calibrated once on a coarse sublattice at alpha = 0.1 and frozen with
    # 25% headroom (the paper leaves C, c unspecified).
    J_ENVELOPE_HEADROOM = 1.25

    def __init__(self, out_dir: Optional[str] = None, threads: int = 1,
                 seed: int = 0):
        self.out_dir = out_dir
        self.threads = threads
        self.seed = seed
        self._tables: Dict[float, object] = {}
        self._cache: Dict[str, object] = {}

    # -- shared resources --------------------------------------------------

    def table(self, alpha: float):
        if alpha not in self._tables:
            self._tables[alpha] = build_kernel_table(alpha)
        return self._tables[alpha]

    def _get(self, key: str, build: Callable):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def ens_critical_long(self) -> List:
        """200 critical runs to T = 1e5 (criteria 9 and 11)."""
        return self._get("lam1_T1e5", lambda: simulate_ensemble(
            1.0, 1e5, 200, seed=self.seed + 1000, threads=self.threads))

    def ens_critical_short(self) -> List:
        """200 critical runs to T = 1e4 (criteria 8 and 13)."""
        return self._get("lam1_T1e4", lambda: simulate_ensemble(
            1.0, 1e4, 200, seed=self.seed + 2000, threads=self.threads))

    def limit_unit_integral(self) -> np.ndarray:
        """1e4 samples of the limit functional at s = 1 (criteria 10, 11)."""
        return self._get("limit_int1", lambda: limit_integral_samples(
            [1.0], 10_000, seed=self.seed + 3000)[:, 0])

    # -- criteria ----------------------------------------------------------

    def criterion_1(self) -> CriterionResult:
        """Hitting probability identity P(T < inf) = 1/(1+2a)."""
        fails = []
        details = []
        for i, a in enumerate((0.05, 0.1, 0.2, 0.5)):
            r = hit_probability(a, 100_000, seed=self.seed + 4000 + i)
            err = abs(r["phat"] - r["truth"])
            tol = 3.0 * r["stderr"] + r["bias_bound"]
            details.append(f"a={a}: |err|={err:.2e} tol={tol:.2e}")
            if err > tol:
                fails.append(a)
        return self._result(1, "hitting identity", not fails,
                            "; ".join(details))

    def criterion_2(self) -> CriterionResult:
        """Kernel normalization and first two moments."""
        fails = []
        details = []
        for a in (0.05, 0.1, 0.2):
            m = table_moments(self.table(a))
            e0 = abs(m["m0"] - 1.0)
            e1 = abs(m["m1"] / ((1 + 2 * a) / (2 * a * a)) - 1.0)
            e2 = abs(m["m2"] / ((1 + a) * (1 + 2 * a) / a ** 4) - 1.0)
            details.append(f"a={a}: |m0-1|={e0:.1e} m1 rel={e1:.1e} "
                           f"m2 rel={e2:.1e}")
            if e0 > 1e-3 or e1 > 5e-3 or e2 > 5e-3:
                fails.append(a)
        return self._result(2, "kernel moments", not fails,
                            "; ".join(details))

    def criterion_3(self) -> CriterionResult:
        """Renewal density limit and convolution cross-check."""
        fails = []
        details = []
        for a in (0.05, 0.1, 0.2):
            t = self.table(a)
            lim = 2 * a * a / (1 + 2 * a)
            rel = abs(t.kstar_of(t.t_tail) / lim - 1.0)
            details.append(f"a={a}: K*(t_tail) rel={rel:.1e}")
            if rel > 0.01:
                fails.append(a)
        t = self.table(0.1)
        x, conv = renewal_convolution(t, 60.0, h=0.02)
        pts = np.linspace(1.0, 59.0, 20)
        diff = np.abs(np.asarray(t.kstar_of(pts))
                      - np.interp(pts, x, conv))
        details.append(f"max |K*inv - K*conv| / a = {diff.max() / 0.1:.1e}")
        if diff.max() > 1e-3 * 0.1:
            fails.append("conv")
        return self._result(3, "renewal limit", not fails,
                            "; ".join(details))

    def criterion_4(self) -> CriterionResult:
        """Tabulated K vs direct MC estimate at alpha = 0.1."""
        a = 0.1
        t = self.table(a)
        pts = np.linspace(0.5, 40.0, 20)
        est = estimate_K(a, pts, 1_000_000, seed=self.seed + 5000)
        err = np.abs(est["khat"] - np.asarray(t.k_of(pts)))
        tol = 3.0 * est["stderr"] + est["bias_bound"] + 1e-5
        worst = float(np.max(err - tol))
        ok = bool(np.all(err <= tol))
        return self._result(4, "kernel cross-oracle", ok,
                            f"20 points, worst err-tol={worst:.2e}")

    def criterion_5(self) -> CriterionResult:
        """J: convolution formula vs paired MC; decay envelope."""
        a = 0.1
        t = self.table(a)
        pairs = [(1.0, 3.0), (1.0, 8.0), (2.0, 5.0), (3.0, 10.0),
                 (5.0, 12.0), (5.0, 30.0), (8.0, 20.0), (10.0, 25.0),
                 (15.0, 40.0), (20.0, 60.0)]
        fails = []
        worst = -np.inf
        for i, (s, u) in enumerate(pairs):
            mc = estimate_J(a, s, u, 400_000, seed=self.seed + 6000 + i)
            quad = j_kernel(t, s, u)
            err = abs(mc["jhat"] - quad)
            tol = 3.0 * mc["stderr"] + mc["bias_bound"] + 2e-4
            worst = max(worst, err - tol)
            if err > tol:
                fails.append((s, u))
        # envelope |J| <= C e^{-c a^2 u} / sqrt((s+1)(u+1)): c from the K
        # envelope fit, C calibrated on a coarse sublattice, then checked
        # with headroom on the full 20x20 lattice
        c = fit_envelope(t)["c_K"]
        s_vals = np.linspace(0.5, 100.0, 20)
        u_vals = np.linspace(1.0, 200.0, 20)
        J = j_kernel_lattice(t, s_vals, u_vals)
        S, U = np.meshgrid(s_vals, u_vals, indexing="ij")
        ratio = np.abs(J) * np.sqrt((S + 1) * (U + 1)) * np.exp(
            c * a * a * U)
        ratio = np.where(S < U, ratio, 0.0)
        C_cal = float(np.max(ratio[::2, ::2]))
        ok_env = bool(np.max(ratio) <= self.J_ENVELOPE_HEADROOM * C_cal)
        ok = not fails and ok_env
        return self._result(
            5, "J formula and envelope", ok,
            f"pairs worst err-tol={worst:.2e}; envelope C={C_cal:.3f} "
            f"max/C={float(np.max(ratio)) / C_cal:.3f}")

    def criterion_6(self) -> CriterionResult:
        """Drift-integral normalization I1 + I2 = 2 + O(sqrt(alpha)).

        Asserted faithfully; the band fails at desk-scale alpha (see module
        docstring), the alpha-decrease half passes.
        """
        devs = {}
        for a in (0.05, 0.02):
            d = drift_integrals(self.table(a))
            devs[a] = abs(d.I1 + d.I2 - 2.0)
        band_ok = all(devs[a] <= 5.0 * math.sqrt(a) for a in devs)
        dec_ok = devs[0.02] < devs[0.05]
        detail = (f"|I1+I2-2|: a=0.05 -> {devs[0.05]:.3f} "
                  f"(band {5 * math.sqrt(0.05):.3f}), a=0.02 -> "
                  f"{devs[0.02]:.3f} (band {5 * math.sqrt(0.02):.3f}); "
                  f"decrease {'ok' if dec_ok else 'violated'}")
        return self._result(6, "drift integral", band_ok and dec_ok, detail)

    def criterion_7(self) -> CriterionResult:
        """Branching criticality and the pgf survival recursion."""
        a = 0.1
        t = self.table(a)
        # offspring mean over >= 1e5 points
        counts = []
        s = 0
        while sum(c.size for c in counts) < 100_000:
            cfg = BranchConfig(alpha=a, roots=[0.0] * 50, t0=0.0,
                               max_generation=60,
                               seed=self.seed + 50_000 + s)
            counts.append(simulate_cluster(cfg, t).offspring_counts())
            s += 1
        oc = np.concatenate(counts)
        zmean = abs(oc.mean() - 1.0) / (oc.std(ddof=1) / math.sqrt(oc.size))
        ok_mean = zmean <= 3.0
        # survival curve over generations 1..30 vs the pgf recursion
        n_trees = 8000
        surv = np.zeros(31)
        for i in range(n_trees):
            cfg = BranchConfig(alpha=a, roots=[0.0], t0=0.0,
                               max_generation=30,
                               seed=self.seed + 60_000 + i)
            gs = simulate_cluster(cfg, t).generation_sizes(30)
            surv += gs > 0
        surv /= n_trees
        p = pgf_survival(30)
        se = np.sqrt(p * (1 - p) / n_trees)
        z = np.abs(surv[1:] - p[1:]) / se[1:]
        ok_surv = bool(np.max(z) <= 3.0)
        return self._result(
            7, "branching criticality", ok_mean and ok_surv,
            f"offspring mean z={zmean:.2f}; survival max z={z.max():.2f} "
            f"(n={oc.size} points, {n_trees} trees)")

    def criterion_8(self) -> CriterionResult:
        """A-priori front bound X_T <= T^{3/4} log^2 T on 200 runs."""
        T = 1e4
        bound = x_bound(T)
        xs = np.array([r.X_T for r in self.ens_critical_short()])
        ok = bool(np.all(xs <= bound))
        return self._result(8, "a-priori bound", ok,
                            f"max X_T={int(xs.max())} bound={bound}")

    def criterion_9(self) -> CriterionResult:
        """Growth exponents for critical, subcritical, supercritical."""
        fits = {}
        fits[1.0] = fit_exponent(self.ens_critical_long()[:50], 1e3, 1e5)
        sub = self._get("lam08_T1e5", lambda: simulate_ensemble(
            0.8, 1e5, 50, seed=self.seed + 7000, threads=self.threads))
        fits[0.8] = fit_exponent(sub, 1e3, 1e5)
        sup = self._get("lam15_T1e5", lambda: simulate_ensemble(
            1.5, 1e5, 50, seed=self.seed + 8000, threads=self.threads))
        fits[1.5] = fit_exponent(sup, 1e3, 1e5)
        ok = (abs(fits[1.0].slope - 2 / 3) <= 0.05
              and abs(fits[0.8].slope - 0.5) <= 0.05
              and fits[1.5].slope >= 0.9)
        detail = "; ".join(f"lam={l}: slope={f.slope:.3f}"
                           for l, f in fits.items())
        return self._result(9, "growth exponents", ok, detail)

    def criterion_10(self) -> CriterionResult:
        """Limit-process property suite."""
        checks = []
        # E V_s^2 = (8/3) s at s = 1
        cfg = LimitConfig(scheme="exact_besq", s_max=1.0, n_grid=60,
                          seed=self.seed + 9000, n_paths=20_000)
        V = sample_bessel_path(cfg).V[:, -1]
        v2 = V ** 2
        z = abs(v2.mean() - 8 / 3) / (v2.std(ddof=1) / math.sqrt(v2.size))
        checks.append(("EV^2", z <= 3.0, f"z={z:.2f}"))
        # self-similarity: t^{1/3} Z_{st} across t in {1, 4} at s = 1
        zs = []
        for i, tt in enumerate((1.0, 4.0)):
            c = LimitConfig(scheme="exact_besq", s_max=tt, n_grid=60,
                            seed=self.seed + 9100 + i, n_paths=10_000)
            zz = z_path(sample_bessel_path(c)).Z[:, -1]
            zs.append(tt ** (1 / 3) * zz)
        ks = ks_two_sample(zs[0], zs[1])
        checks.append(("self-similarity", ks["pvalue"] > 0.01,
                       f"p={ks['pvalue']:.3f}"))
        # sigma = 0 ODE
        c = LimitConfig(scheme="euler_z", s_max=0.5, n_grid=40, z0=1.0,
                        sigma2=0.0, seed=self.seed + 9200, n_paths=1)
        p = euler_general(c)
        exact = (1.0 + 12.0 * p.times) ** (-1 / 3)
        err = float(np.max(np.abs(p.Z[0] - exact)))
        checks.append(("ODE", err <= 1e-6, f"err={err:.1e}"))
        # explosion dichotomy
        fracs = {}
        for i, s2 in enumerate((3.0, 1.5)):
            c = LimitConfig(scheme="euler_z", s_max=2.0, n_grid=40, z0=1.0,
                            sigma2=s2, seed=self.seed + 9300 + i,
                            n_paths=2000)
            p = euler_general(c)
            fracs[s2] = float(np.mean(~np.isnan(p.exploded_at)))
        checks.append(("explosion", fracs[3.0] > 0.2 and fracs[1.5] < 0.01,
                       f"frac(3)={fracs[3.0]:.3f} frac(1.5)={fracs[1.5]:.3f}"))
        ok = all(c[1] for c in checks)
        return self._result(10, "limit-process suite", ok,
                            "; ".join(f"{n} {d}" for n, _, d in checks))

    def criterion_11(self) -> CriterionResult:
        """Scaled front vs limit functional, KS <= 0.15 and decreasing."""
        runs = self.ens_critical_long()
        lim = self.limit_unit_integral()
        ks = {}
        for t in (1e3, 1e4, 1e5):
            X = trajectory_matrix(runs, np.array([t]))[:, 0]
            ks[t] = ks_two_sample(X / t ** (2 / 3), lim)["statistic"]
        ok = (ks[1e5] <= 0.15 and ks[1e3] > ks[1e4] > ks[1e5])
        detail = "; ".join(f"t={t:.0e}: KS={v:.3f}" for t, v in ks.items())
        return self._result(11, "distributional limit", ok, detail)

    def criterion_12(self) -> CriterionResult:
        """Increment law Var(dL) ~ 4 a^5 dt on critical-cascade runs.

        Runs are point configurations of the age-dependent critical
        branching process seeded by a rate-alpha segment (the regime the
        increment law describes; the desk-scale aggregate cannot hold its
        speed near a fixed alpha for the required window).  Eight
        non-overlapping windows per seed are pooled: window increments are
        exact martingale increments, hence uncorrelated.
        """
        a = 0.05
        t = self.table(a)
        delta = 25.0 / a ** 2
        t0, tm, K = 2000.0, 4000.0, 8
        horizon = tm + K * delta
        runs = self._get("branch_sandwich", lambda: [
            UnitStep(np.sort(simulate_cluster(
                BranchConfig(alpha=a, t0m=0.0, t0=t0, horizon=horizon,
                             max_generation=600, seed=50_000 + i),
                t).times))
            for i in range(400)])
        cfg1 = dg.DiagConfig(alpha=a, t0m=0.0, t0=tm, delta=delta)
        cfg2 = dg.DiagConfig(alpha=a, t0m=0.0, t0=tm, delta=2 * delta)
        s1 = dg.increment_stats(runs, t, cfg1, n_windows=K)
        s2 = dg.increment_stats(runs, t, cfg2, n_windows=K // 2)
        ratio = s1["variance_ratio"]
        ok_band = 0.6 <= ratio <= 1.6
        ok_mean = s1["mean_ci"][0] <= 0.0 <= s1["mean_ci"][1]
        # doubling: bootstrap CI over seeds of var(2 delta) / var(delta)
        rng = np.random.default_rng(self.seed + 11_000)
        n = len(runs)
        boots = np.empty(400)
        for b in range(400):
            idx = rng.integers(0, n, n)
            boots[b] = (s2["increments"][idx].var(ddof=1)
                        / s1["increments"][idx].var(ddof=1))
        lo, hi = np.percentile(boots, [2.5, 97.5])
        ok_double = lo <= 2.0 <= hi
        ok = ok_band and ok_mean and ok_double
        return self._result(
            12, "increment law", ok,
            f"var ratio={ratio:.3f} in [0.6,1.6]: {ok_band}; "
            f"mean={s1['mean']:.2e} ci0={ok_mean}; "
            f"doubling CI=[{lo:.2f},{hi:.2f}] contains 2: {ok_double}")

    def criterion_13(self) -> CriterionResult:
        """Compensator time change turns absorptions into rate-1 arrivals."""
        incs = []
        for r in self.ens_critical_short()[:50]:
            comp = r.compensator_at_absorption
            if comp.size:
                incs.append(np.diff(np.concatenate([[0.0], comp])))
        pooled = np.concatenate(incs)
        res = kstest(pooled, "expon")
        ok = res.pvalue > 0.01
        return self._result(
            13, "compensator time change", bool(ok),
            f"n={pooled.size} KS={res.statistic:.4f} p={res.pvalue:.3f}")

    def criterion_14(self) -> CriterionResult:
        """Manifest replay produces byte-identical CSV bodies."""
        base = self.out_dir or "."
        manifests = [
            {"kind": "simulate", "params": {"lam": 1.0, "T": 500.0,
                                            "record_hazard": True},
             "replicas": 2, "seed": 11},
            {"kind": "kernel", "params": {"alpha": 0.2}},
            {"kind": "branching", "params": {"alpha": 0.1, "t0": 50.0,
                                             "horizon": 500.0},
             "replicas": 3, "seed": 12},
            {"kind": "limit", "params": {"s_max": 1.0, "n_grid": 40},
             "replicas": 50, "seed": 13},
            {"kind": "exponent", "params": {"lam": 1.0, "t_min": 100.0,
                                            "t_max": 2000.0},
             "replicas": 12, "seed": 14},
            {"kind": "compare", "params": {"t_scale": 1000.0,
                                           "s_grid": [0.5, 1.0],
                                           "n_limit_paths": 200},
             "replicas": 15, "seed": 15},
            {"kind": "diagnose", "params": {"alpha": 0.1, "t0": 300.0,
                                            "burn": 100.0, "delta": 400.0,
                                            "T": 1200.0},
             "replicas": 4, "seed": 16},
        ]
        mismatches = []
        n_files = 0
        for rep in ("replay_a", "replay_b"):
            for i, m in enumerate(manifests):
                mm = dict(m)
                mm["out"] = os.path.join(base, rep, f"exp_{i}")
                run_experiment(mm, threads=self.threads)
        for i in range(len(manifests)):
            da = os.path.join(base, "replay_a", f"exp_{i}")
            for fa in sorted(glob.glob(os.path.join(da, "**", "*.csv"),
                                       recursive=True)):
                fb = fa.replace("replay_a", "replay_b", 1)
                n_files += 1
                if not (os.path.exists(fb) and filecmp.cmp(fa, fb,
                                                           shallow=False)):
                    mismatches.append(os.path.basename(fa))
        ok = n_files > 0 and not mismatches
        return self._result(14, "determinism", ok,
                            f"{n_files} CSVs compared, "
                            f"mismatches: {mismatches or 'none'}")

    # -- driver ------------------------------------------------------------

    def _result(self, number: int, name: str, passed: bool,
                detail: str) -> CriterionResult:
        elapsed = time.time() - self._t_start
        return CriterionResult(number, name, bool(passed), detail, elapsed)

    def run_one(self, number: int) -> CriterionResult:
        self._t_start = time.time()
        return getattr(self, f"criterion_{number}")()

    def run_all(self, only: Optional[Sequence[int]] = None,
                verbose: bool = True) -> List[CriterionResult]:
        numbers = list(only) if only else list(range(1, 15))
        results = []
        for k in numbers:
            res = self.run_one(k)
            results.append(res)
            if verbose:
                print(res.line(), flush=True)
        if self.out_dir:
            os.makedirs(self.out_dir, exist_ok=True)
            with open(os.path.join(self.out_dir, "criteria.json"),
                      "w") as fh:
                json.dump([r.as_dict() for r in results], fh, indent=1)
            with open(os.path.join(self.out_dir, "criteria.txt"), "w") as fh:
                fh.write("\n".join(r.line() for r in results) + "\n")
        return results


def run_acceptance(out_dir: Optional[str] = None, threads: int = 1,
                   only: Optional[Sequence[int]] = None,
                   seed: int = 0, verbose: bool = True
                   ) -> List[CriterionResult]:
    """Run the acceptance criteria (all 14 by default)."""
    suite = AcceptanceSuite(out_dir=out_dir, threads=threads, seed=seed)
    return suite.run_all(only=only, verbose=verbose)
