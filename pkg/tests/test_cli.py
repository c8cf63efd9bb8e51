import csv
import json
from pathlib import Path

import pytest

from magvisc.cli import main
from magvisc.config import config_from_dict, write_config

GOLDEN = json.loads((Path(__file__).parent / "golden" / "schema.json").read_text())


def _header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_simulate_stationary(tmp_path):
    out = tmp_path / "out"
    rc = main(["simulate", "--out", str(out), "--stride", "2",
               "--set", "grid.N=20", "--set", "model.T=0.1", "--set", 'initial.u1="zero"',
               "--set", 'initial.theta="constant"', "--set", "initial.theta_max=0.5"])
    assert rc == 0
    assert _header(out / "trajectory.csv") == GOLDEN["trajectory.csv"]
    assert _header(out / "energy.csv") == GOLDEN["energy.csv"]
    rows = _rows(out / "trajectory.csv")
    assert all(float(r["u"]) == 0.0 for r in rows)
    levels = sorted({float(r["t"]) for r in rows})
    assert len(levels) == 3 and levels[-1] == pytest.approx(0.1)  # levels 0, 2, 4 of 4 steps
    summary = json.loads((out / "summary.json").read_text())
    assert sorted(summary) == GOLDEN["summary.simulate"]
    assert summary["passed"] is True
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(manifest) == GOLDEN["manifest"]
    assert sorted(manifest["versions"]) == GOLDEN["versions"]
    assert (out / "wall_time.txt").exists()


def test_manifest_reproduces_outputs(tmp_path):
    out = tmp_path / "a"
    main(["simulate", "--out", str(out), "--set", "grid.N=20", "--set", "model.T=0.2"])
    names = ("trajectory.csv", "energy.csv", "summary.json", "manifest.json")
    before = {n: (out / n).read_bytes() for n in names}
    manifest = json.loads(before["manifest.json"])
    cfg = config_from_dict(manifest["config"])
    write_config(cfg, tmp_path / "again.toml")
    for n in names:
        (out / n).unlink()
    main(["simulate", "--config", str(tmp_path / "again.toml")])
    assert {n: (out / n).read_bytes() for n in names} == before


def test_config_error_exit_status(tmp_path, capsys):
    assert main(["simulate", "--set", "kernel.family=\"fractional\"", "--set", "kernel.alpha=1.5"]) == 2
    assert "alpha" in capsys.readouterr().err


def test_failing_diagnostic_exit_status(tmp_path):
    # the frozen tolerance is far below the coarse-grid energy oscillation
    rc = main(["simulate", "--out", str(tmp_path), "--set", "grid.N=20", "--set", "diagnostics.tol_k=1e-9"])
    assert rc == 1
    assert json.loads((tmp_path / "summary.json").read_text())["checks"]["lemma21"]["passed"] is False


def test_validate_kernel(tmp_path):
    assert main(["validate-kernel", "--out", str(tmp_path), "--set", 'kernel.family="fractional"']) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["integrable_on_0T"] is True and s["sign_violations"] == []


def test_sweep_epsilon_summary(tmp_path):
    rc = main(["sweep-epsilon", "--out", str(tmp_path), "--set", 'kernel.family="fractional"',
               "--set", "model.lambda=1.0", "--set", "grid.N=40",
               "--set", "sweep.epsilons=[0.1, 0.01, 0.001, 0.0001]"])
    s = json.loads((tmp_path / "summary.json").read_text())
    assert sorted(s) == GOLDEN["summary.sweep-epsilon"]
    assert s["cauchy_decreasing"] is True
    assert _header(tmp_path / "sweep.csv") == GOLDEN["sweep.csv"]
    # C1 depends on eps, so the uniformity check fails and so does the run
    assert s["checks"]["bounds_uniform"]["passed"] is False and rc == 1


def test_check_weak_decreasing(tmp_path):
    rc = main(["check-weak", "--out", str(tmp_path), "--set", "grid.N=25", "--set", "sweep.levels=2"])
    s = json.loads((tmp_path / "summary.json").read_text())
    assert rc == 0
    assert abs(s["weak_residuals_u"][1]) < abs(s["weak_residuals_u"][0])


def test_refine_and_sweep_delta(tmp_path):
    assert main(["refine", "--out", str(tmp_path / "r"), "--set", "grid.N=20"]) == 0
    s = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert min(s["observed_orders"]) >= 1.8
    main(["sweep-delta", "--out", str(tmp_path / "d"), "--set", 'kernel.family="fractional"',
          "--set", "model.epsilon=0.05", "--set", "grid.N=20", "--set", "model.lambda=1.0", "--jobs", "2"])
    s = json.loads((tmp_path / "d" / "summary.json").read_text())
    assert s["penalty_within_cap"] is True


def test_deterministic_outputs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    args = ["simulate", "--set", "grid.N=40", "--set", 'kernel.family="fractional"',
            "--set", "model.epsilon=0.05", "--set", "model.lambda=1.0"]
    main(args)
    first = {p.name: p.read_bytes() for p in Path("out").iterdir() if p.suffix in (".csv", ".json")}
    main(args)
    second = {p.name: p.read_bytes() for p in Path("out").iterdir() if p.suffix in (".csv", ".json")}
    assert first == second and len(first) == 4
