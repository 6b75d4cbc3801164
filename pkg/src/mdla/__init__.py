"""Simulation and numerical-verification workbench for one-dimensional
multi-particle diffusion limited aggregation.

Modules:
    unitstep: unit-step barrier histories.
    hitting: MC estimators for barrier hitting probabilities, K and J.
    kernels: kernel tables via contour Laplace inversion, renewal density,
        two-point kernel J, drift integrals.
    simcore: event-driven lattice simulator for the aggregate.
    branching: age-dependent critical branching (cluster) process.
    limitproc: Bessel / limiting speed processes and their functionals.
    diagnostics: speed approximations S1/S2, smoothed speed L, increments.
    stats: exponent fits and distributional comparisons.
    harness: seeded experiment manifests and artifacts.
    acceptance: the 14-criterion verification suite.
    cli: command-line entry point.
"""

from .acceptance import run_acceptance
from .branching import BranchConfig, ClusterTree, pgf_survival, simulate_cluster
from .harness import (Experiment, limit_integral_samples, run_experiment,
                      sandwich_ensemble, simulate_ensemble)
from .hitting import estimate_J, estimate_K, hit_probability
from .kernels import KernelTable, build_kernel_table, j_kernel
from .limitproc import LimitConfig, euler_general, integrate_z, \
    sample_bessel_path, z_path
from .simcore import (ModelConfig, RunRecord, run, run_with_initial_condition,
                      sandwich_profile, x_bound)
from .stats import fit_exponent, ks_two_sample
from .unitstep import UnitStep

__version__ = "0.1.0"

__all__ = [
    "BranchConfig", "ClusterTree", "Experiment", "KernelTable", "LimitConfig",
    "ModelConfig", "RunRecord", "UnitStep", "build_kernel_table",
    "estimate_J", "estimate_K", "euler_general", "fit_exponent",
    "hit_probability", "integrate_z", "j_kernel", "ks_two_sample",
    "limit_integral_samples", "pgf_survival", "run", "run_acceptance",
    "run_experiment", "run_with_initial_condition", "sample_bessel_path",
    "sandwich_ensemble", "sandwich_profile", "simulate_cluster",
    "simulate_ensemble", "x_bound", "z_path",
]
