"""Command-line entry point.

One subcommand per experiment pipeline plus `accept` for the acceptance
suite.  Parameters come from --config (a JSON object or a path to one),
with --seed / --replicas / --out / --threads overriding the manifest
fields.  Exit codes: 0 success, 1 acceptance-criteria failure, 2 bad
configuration, 3 numerical failure during execution.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .harness import _KINDS, Experiment, run_experiment

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CRITERIA = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdla",
        description="Simulator and numerical workbench for one-dimensional "
                    "multi-particle aggregation growth.")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in _KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} pipeline")
        p.add_argument("--config", default=None,
                       help="JSON object or path to a JSON file with the "
                            "pipeline parameters")
        p.add_argument("--seed", type=int, default=None,
                       help="base RNG seed (replica i uses seed + i)")
        p.add_argument("--replicas", type=int, default=None,
                       help="ensemble size")
        p.add_argument("--out", default=".",
                       help="output directory for artifacts")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes for ensemble pipelines")
    return parser


def _load_config(raw: str | None) -> dict:
    if raw is None:
        return {}
    if os.path.exists(raw):
        with open(raw) as fh:
            cfg = json.load(fh)
    else:
        cfg = json.loads(raw)
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        # a config may itself be a full manifest; flag overrides win
        params = cfg.get("params", {k: v for k, v in cfg.items()
                                    if k not in ("replicas", "seed", "out")})
        exp = Experiment(
            kind=args.kind,
            params=params,
            replicas=(args.replicas if args.replicas is not None
                      else cfg.get("replicas", 1)),
            seed=args.seed if args.seed is not None else cfg.get("seed", 0),
            out_dir=args.out,
        )
    except (ValueError, TypeError, json.JSONDecodeError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_experiment(exp, threads=args.threads)
    except (ValueError, TypeError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ArithmeticError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.kind == "accept" and not summary.get("all_passed", False):
        return EXIT_CRITERIA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
