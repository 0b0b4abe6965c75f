"""Command-line interface tests (tiny budgets)."""

import csv
import json

import numpy as np
import pytest

from epigame import cli


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def solve_dir(tmp_path_factory):
    """A tiny but real solve run shared by the CLI tests."""
    out = tmp_path_factory.mktemp("solve")
    code = run_cli("solve", "--preset", "ny-nj-pa", "--out", str(out),
                   "--stages", "1", "--config", str(_tiny_config(out)))
    assert code == 0
    return out


def _tiny_config(tmp_path):
    import yaml
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump({
        "grid": {"num_steps": 10},
        "solver": {"iters_per_stage": 3, "batch_size": 4, "hidden": [8, 8],
                   "paths": 4, "tolerance": 0.0},
    }))
    return path


def test_solve_outputs(solve_dir):
    assert (solve_dir / "final.npz").exists()
    assert (solve_dir / "stage_000.npz").exists()
    manifest = json.loads((solve_dir / "run_manifest.json").read_text())
    assert manifest["seed"] == 0
    assert "config_hash" in manifest and len(manifest["config_hash"]) == 16
    assert manifest["stages_run"] == 1
    history = (solve_dir / "metric_history.csv").read_text().splitlines()
    assert history[0].startswith("# epigame v1 config_hash=")
    assert history[1].split(",")[0] == "stage"
    assert len(history) == 3


def test_simulate_with_checkpoint_policy(solve_dir, tmp_path):
    out = tmp_path / "sim"
    code = run_cli("simulate", "--preset", "ny-nj-pa",
                   "--config", str(solve_dir / "tiny.yaml"),
                   "--policy", f"checkpoint:{solve_dir / 'final.npz'}",
                   "--out", str(out), "--paths", "3")
    assert code == 0
    for name in ("paths.csv", "summary.csv", "run_manifest.json"):
        assert (out / name).exists()
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0].startswith("# epigame v1")
    header = lines[1].split(",")
    assert header[:2] == ["t", "region"]
    rows = list(csv.reader(lines[2:]))
    assert len(rows) == 11 * 3
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["paths"] == 3


def test_simulate_constant_policy(tmp_path):
    out = tmp_path / "sim"
    cfgpath = _tiny_config(tmp_path)
    code = run_cli("simulate", "--preset", "ny-nj-pa", "--config", str(cfgpath),
                   "--policy", "constant:0.5", "--out", str(out), "--paths", "2")
    assert code == 0
    lines = (out / "paths.csv").read_text().splitlines()
    rows = list(csv.reader(lines[2:]))
    ell = {float(r[7]) for r in rows}
    assert ell == {0.5}


def test_simulate_rejects_unknown_policy(tmp_path, capsys):
    code = run_cli("simulate", "--preset", "ny-nj-pa", "--policy", "wat",
                   "--out", str(tmp_path / "x"))
    assert code == 2
    assert "unknown policy source" in capsys.readouterr().err


def test_simulate_rejects_mismatched_checkpoint(solve_dir, tmp_path, capsys):
    """A checkpoint trained for 3 regions cannot drive a 1-region config."""
    import yaml
    cfgpath = tmp_path / "one.yaml"
    cfgpath.write_text(yaml.safe_dump({
        "model": {"num_regions": 1, "beta_base_per_day": 0.17,
                  "residency_fraction": 1.0, "noise_s": 0.05, "noise_e": 0.03,
                  "populations": [1.0e6]},
        "initial_state": {"E": [2.0e-4], "I": [1.0e-4], "R": [0.0]},
        "grid": {"num_steps": 5},
        "solver": {"paths": 2},
    }))
    code = run_cli("simulate", "--preset", "ny-nj-pa", "--config", str(cfgpath),
                   "--policy", f"checkpoint:{solve_dir / 'final.npz'}",
                   "--out", str(tmp_path / "sim"))
    assert code == 2
    assert "players" in capsys.readouterr().err


def test_evaluate_constant_deviation(solve_dir, tmp_path):
    report_path = tmp_path / "report.json"
    code = run_cli("evaluate", "--preset", "ny-nj-pa",
                   "--config", str(solve_dir / "tiny.yaml"),
                   "--checkpoint", str(solve_dir / "final.npz"),
                   "--player", "0", "--deviation", "constant:0.9",
                   "--out", str(report_path), "--paths", "4")
    assert code == 0
    report = json.loads(report_path.read_text())
    assert len(report["results"]) == 1
    res = report["results"][0]
    assert res["player"] == 0
    assert np.isfinite(res["nash_residual"])
    assert res["nash_residual_se"] >= 0
    # paired comparison: other players' costs under deviation stay finite
    assert all(np.isfinite(res["cost_deviation"]))


def test_ode_demo(tmp_path):
    out = tmp_path / "ode.csv"
    code = run_cli("ode-demo", "--horizon", "10", "--step", "0.5",
                   "--out", str(out))
    assert code == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["t", "S", "E", "I", "R"]
    assert len(rows) == 22
    total = sum(float(v) for v in rows[-1][1:])
    assert total == pytest.approx(1.0, abs=1e-9)


def test_sis_demo(tmp_path):
    out = tmp_path / "sis.csv"
    code = run_cli("sis-demo", "--steps", "50", "--seed", "3", "--out", str(out))
    assert code == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["t", "n"]
    assert len(rows) == 52


def test_export_figure_data(tmp_path):
    cfgpath = _tiny_config(tmp_path)
    out = tmp_path / "summary.csv"
    code = run_cli("export-figure-data", "--preset", "ny-nj-pa",
                   "--config", str(cfgpath), "--paths", "3", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# epigame v1")
    assert lines[1].split(",")[0] == "t"
