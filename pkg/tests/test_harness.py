import json
import os

import numpy as np
import pytest

from mdla.harness import (Experiment, compare_limit, limit_integral_samples,
                          run_experiment, sandwich_ensemble,
                          simulate_ensemble)


def test_experiment_validation():
    with pytest.raises(ValueError):
        Experiment(kind="nope")
    with pytest.raises(ValueError):
        Experiment(kind="simulate", replicas=0)


def test_simulate_ensemble_seeding():
    a = simulate_ensemble(1.0, 100.0, 3, seed=5)
    b = simulate_ensemble(1.0, 100.0, 3, seed=5)
    assert [r.seed for r in a] == [5, 6, 7]
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.front_trajectory.jumps,
                              rb.front_trajectory.jumps)


def test_sandwich_ensemble():
    runs = sandwich_ensemble(0.1, 50.0, 1.0, 120.0, 2, seed=1)
    for r in runs:
        assert r.t_start == 50.0
        assert r.config.T == 120.0


def test_limit_integral_samples_shape():
    out = limit_integral_samples([0.5, 1.0], 200, seed=2)
    assert out.shape == (200, 2)
    assert np.all(out[:, 1] > out[:, 0])  # integral grows with the horizon
    assert np.all(out > 0)


def test_compare_limit_horizon_guard():
    runs = simulate_ensemble(1.0, 100.0, 12, seed=9)
    lim = limit_integral_samples([1.0], 100, seed=3)
    with pytest.raises(ValueError):
        compare_limit(runs, lim, [1.0], 500.0)
    rows = compare_limit(runs, lim, [1.0], 100.0)
    assert rows[0]["s"] == 1.0
    assert 0.0 <= rows[0]["statistic"] <= 1.0


KINDS_SMOKE = [
    ("simulate", {"lam": 1.0, "T": 100.0}, 2),
    ("kernel", {"alpha": 0.2}, 1),
    ("hitting", {"alpha": 0.2, "n": 5000}, 1),
    ("branching", {"alpha": 0.1, "t0": 40.0, "horizon": 200.0}, 2),
    ("limit", {"s_max": 0.5, "n_grid": 30}, 40),
    ("exponent", {"lam": 1.0, "t_min": 20.0, "t_max": 400.0}, 12),
    ("compare", {"t_scale": 200.0, "s_grid": [1.0], "n_limit_paths": 50},
     12),
    ("diagnose", {"alpha": 0.1, "t0": 150.0, "burn": 50.0, "delta": 150.0,
                  "T": 500.0}, 3),
]


@pytest.mark.parametrize("kind,params,replicas", KINDS_SMOKE)
def test_run_experiment_kinds(tmp_path, kind, params, replicas):
    out = str(tmp_path / kind)
    summary = run_experiment({"kind": kind, "params": params,
                              "replicas": replicas, "seed": 7, "out": out})
    assert isinstance(summary, dict) and summary
    assert os.path.exists(os.path.join(out, "summary.json"))
    assert os.path.exists(os.path.join(out, "report.txt"))


def test_manifest_replay_identical_csv(tmp_path):
    manifest = {"kind": "simulate",
                "params": {"lam": 1.0, "T": 150.0, "record_hazard": True},
                "replicas": 2, "seed": 3}
    bodies = []
    for rep in ("a", "b"):
        out = str(tmp_path / rep)
        run_experiment({**manifest, "out": out})
        chunks = []
        for name in sorted(os.listdir(out)):
            if name.endswith(".csv"):
                with open(os.path.join(out, name), "rb") as fh:
                    chunks.append((name, fh.read()))
        bodies.append(chunks)
    assert bodies[0] and bodies[0] == bodies[1]


def test_manifest_from_json_file(tmp_path):
    out = str(tmp_path / "exp")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"kind": "kernel", "params": {"alpha": 0.3},
                                "out": out}))
    summary = run_experiment(str(path))
    assert summary["alpha"] == 0.3
    assert abs(summary["m0"] - 1.0) < 1e-3
