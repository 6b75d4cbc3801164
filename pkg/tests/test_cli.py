import json
import os

import pytest

from mdla.cli import (EXIT_CONFIG, EXIT_OK, build_parser, main)


def test_parser_has_all_subcommands():
    parser = build_parser()
    sub = next(a for a in parser._actions
               if a.__class__.__name__ == "_SubParsersAction")
    assert set(sub.choices) == {"simulate", "kernel", "hitting", "branching",
                                "limit", "diagnose", "exponent", "compare",
                                "accept"}


def test_kernel_subcommand_ok(tmp_path):
    out = str(tmp_path / "k")
    code = main(["kernel", "--config", '{"alpha": 0.2}', "--out", out])
    assert code == EXIT_OK
    assert os.path.exists(os.path.join(out, "summary.json"))


def test_simulate_with_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lam": 1.0, "T": 80.0, "replicas": 5}))
    out = str(tmp_path / "s")
    code = main(["simulate", "--config", str(cfg), "--replicas", "2",
                 "--seed", "9", "--out", out])
    assert code == EXIT_OK
    with open(os.path.join(out, "summary.json")) as fh:
        meta = json.load(fh)
    assert meta["replicas"] == 2   # the flag overrides the file
    assert meta["seed"] == 9
    assert meta["params"]["T"] == 80.0


def test_bad_json_is_config_error(tmp_path):
    assert main(["simulate", "--config", "{not json",
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_parameter_is_config_error(tmp_path):
    assert main(["simulate", "--config", '{"lam": -2.0}',
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_non_object_config_rejected(tmp_path):
    assert main(["simulate", "--config", "[1, 2]",
                 "--out", str(tmp_path)]) == EXIT_CONFIG
