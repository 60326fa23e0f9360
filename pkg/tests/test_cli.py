import json
import os

import pytest

from kirchhoff.cli import run_command


def _write_config(path, **updates):
    cfg = {
        "domain": {"kind": "interval", "bounds": [0.0, 1.0], "resolution": 64},
        "problem": {"a": 1.0, "b": 1.0},
        "nonlinearity": {
            "kind": "sum_linear_cubic",
            "f0": 2.0,
            "f_inf": 1.0,
            "lambda1": None,
            "mu1": None,
        },
        "continuation": {"step_ds": 0.5, "max_steps": 200, "max_norm": 20.0},
        "outputs": {"directory": str(path.parent / "out")},
    }
    for section, fields in updates.items():
        cfg.setdefault(section, {}).update(fields)
    path.write_text(json.dumps(cfg))
    return cfg


def test_eig_linear_artifacts(tmp_path):
    cfg_path = tmp_path / "config.json"
    _write_config(cfg_path)
    assert run_command("eig-linear", cfg_path) == 0
    lines = (tmp_path / "out" / "eigenpairs.csv").read_text().strip().splitlines()
    assert lines[0] == "index,lambda,residual"
    assert len(lines) == 4  # default eig_count = 3
    lam1 = float(lines[1].split(",")[1])
    import numpy as np

    assert lam1 == pytest.approx(np.pi**2, rel=1e-3)


def test_branch_artifacts_and_exit(tmp_path):
    cfg_path = tmp_path / "config.json"
    _write_config(cfg_path)
    assert run_command("branch", cfg_path) == 0
    report = json.loads((tmp_path / "out" / "asymptote.json").read_text())
    assert report["termination"] == "max_norm_reached"
    assert report["points"] >= 10
    assert (tmp_path / "out" / "branch.csv").exists()


def test_properties_pass(tmp_path, capsys):
    cfg_path = tmp_path / "config.json"
    _write_config(cfg_path)
    assert run_command("properties", cfg_path) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_missing_config_is_usage_error(tmp_path):
    missing = tmp_path / "nope.json"
    assert run_command("branch", missing) == 2
    assert not (tmp_path / "out").exists()


def test_invalid_json_is_usage_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_command("branch", bad) == 2


def test_unknown_key_is_usage_error(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg = _write_config(cfg_path)
    cfg["domain"]["shape"] = "disk"
    cfg_path.write_text(json.dumps(cfg))
    assert run_command("eig-linear", cfg_path) == 2


def test_unknown_subcommand_is_usage_error(tmp_path):
    cfg_path = tmp_path / "config.json"
    _write_config(cfg_path)
    assert run_command("frobnicate", cfg_path) == 2


def test_override_changes_resolution(tmp_path):
    cfg_path = tmp_path / "config.json"
    _write_config(cfg_path)
    assert run_command("eig-linear", cfg_path, ["domain.resolution=32"]) == 0
    coarse = (tmp_path / "out" / "eigenpairs.csv").read_text()
    assert run_command("eig-linear", cfg_path) == 0
    fine = (tmp_path / "out" / "eigenpairs.csv").read_text()
    assert coarse != fine


def test_bad_override_is_usage_error(tmp_path):
    cfg_path = tmp_path / "config.json"
    _write_config(cfg_path)
    assert run_command("eig-linear", cfg_path, ["domain.sides=3"]) == 2
    assert run_command("eig-linear", cfg_path, ["no-equals-sign"]) == 2


def test_sweep_requires_vanishing_a(tmp_path, capsys):
    cfg_path = tmp_path / "config.json"
    _write_config(cfg_path)
    assert run_command("sweep-a", cfg_path) == 1


def test_sweep_artifacts(tmp_path):
    cfg_path = tmp_path / "config.json"
    _write_config(
        cfg_path,
        problem={"a": 0.0},
        nonlinearity={"kind": "sum_linear_cubic", "f0_tilde": 1.0, "f_inf": 0.5,
                      "f0": None, "lambda1": None, "mu1": None},
        sweep={"n_list": [1, 2, 4]},
        continuation={"step_ds": 0.4, "max_steps": 200, "max_norm": 15.0},
    )
    assert run_command("sweep-a", cfg_path) == 0
    report = json.loads((tmp_path / "out" / "family_report.json").read_text())
    assert [m["n"] for m in report["members"]] == [1, 2, 4]
    assert report["diffs_decreasing"]
    for n in (1, 2, 4):
        assert (tmp_path / "out" / "branch_n{}.csv".format(n)).exists()


def test_no_partial_artifacts_in_output_dir(tmp_path):
    cfg_path = tmp_path / "config.json"
    _write_config(cfg_path)
    assert run_command("eig-linear", cfg_path) == 0
    leftovers = [p for p in os.listdir(tmp_path / "out") if p.startswith(".tmp-")]
    assert leftovers == []
