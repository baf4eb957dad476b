import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from conilay import cli, verify
from conilay.assembly import FiberProblem, assemble
from conilay.geometry import read_mesh

SMALL_MESH = {"truncation": 30.0, "h_near": 0.5, "n_transverse": 6, "near_extent": 5.0}


def _read_csv(path):
    lines = [line for line in open(path) if not line.startswith("#")]
    names = lines[0].strip().split(",")
    rows = np.array([[float(v) if v not in ("true", "false") else float(v == "true") for v in line.strip().split(",")] for line in lines[1:]])
    return {name: rows[:, i] for i, name in enumerate(names)}


def _write(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.mark.parametrize(
    "raw",
    [
        {"experiment": "SweepTheta", "theta_deg": [89.9]},
        {"experiment": "SweepTheta", "theta_deg": 0.0},
        {"experiment": "SweepTheta", "theta_deg": -5},
        {"experiment": "Semiclassical", "h": [0.1, 0.0]},
        {"experiment": "Modes", "k": 0},
        {"experiment": "Modes", "degree": 3},
        {"experiment": "Potential", "x_range": [-5.0, 1.0]},
        {"experiment": "Potential", "x_range": [2.0, 1.0]},
        {"experiment": "Potential", "colour": "red"},
        {"experiment": "Nothing"},
        {},
    ],
)
def test_config_validation(raw):
    with pytest.raises(cli.ConfigError):
        cli.load_config(raw)


def test_config_accepts_limits_and_scalars():
    cfg = cli.load_config({"experiment": "SweepTheta", "theta_deg": 89.0, "h": 0.1})
    assert cfg.theta_deg == [89.0] and cfg.h == [0.1]
    assert cfg.thetas == [math.radians(89.0)]
    cfg2 = cli.load_config({"theta_deg": 2.5}, "Modes")
    assert cfg2.experiment is cli.Experiment.MODES


def test_bad_mesh_keys():
    cfg = cli.load_config({"experiment": "Modes", "mesh": {"spacing": 1.0}})
    with pytest.raises(cli.ConfigError):
        cfg.mesh_config(cli.ex.meridian_config())


def test_exit_code_on_bad_config(tmp_path, capsys):
    path = _write(tmp_path, {"theta_deg": [89.9]})
    assert cli.main(["SweepTheta", "--config", path, "--out", str(tmp_path / "o")]) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_potential_rerun_is_byte_identical(tmp_path):
    path = _write(tmp_path, {"x_range": [-4.0, 5.0], "n_points": 40})
    assert cli.main(["Potential", "--config", path, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["Potential", "--config", path, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "potential.csv").read_bytes()
    b = (tmp_path / "b" / "potential.csv").read_bytes()
    assert a == b
    text = a.decode()
    assert text.startswith("# experiment Potential\n# config_sha256 ")
    rows = [line for line in text.splitlines() if not line.startswith("#")]
    assert rows[0] == "x,v,residual" and len(rows) == 41


def test_sweep_writes_limit_rows(tmp_path):
    cfg = cli.load_config({"experiment": "SweepTheta", "theta_deg": [30.0], "k": 2, "mesh": {"truncation": 10.0, "h_near": 0.4}})
    path = cli.run_sweep_theta(cfg, tmp_path)
    data = _read_csv(path)
    limit = data["mu_n"][data["theta_deg"] == 0.0]
    assert np.allclose(limit, 2.404825557695773**2 / math.pi**2)
    mu = data["mu_n"][data["theta_deg"] == 30.0]
    assert len(mu) == 2 and limit[0] < mu[0] < 1.0 < mu[1]


@pytest.fixture(scope="module")
def modes_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("modes")
    cfg = cli.load_config({"experiment": "Modes", "theta_deg": 2.5, "k": 2, "mesh": SMALL_MESH})
    cli.run_modes(cfg, out)
    return cfg, out


def test_mode_files_round_trip_unit_mass(modes_run):
    cfg, out = modes_run
    mesh = read_mesh(out / "mesh.txt")
    A = assemble(FiberProblem(0, cfg.thetas[0], mesh))
    for n in (1, 2):
        data = _read_csv(out / f"mode_{n}.csv")
        psi = data["psi"]
        assert len(psi) == A.dofs.n_dofs
        assert abs(psi @ (A.M @ psi) - 1.0) < 1e-10
        # nodal coordinates are (z, r) of the dofs
        assert np.all(data["y"] >= -1e-12)
        assert psi[np.argmax(np.abs(psi))] > 0


def test_ground_mode_concentrates_at_negative_z(modes_run):
    _, out = modes_run
    data = _read_csv(out / "modes.csv")
    assert data["mass_z_negative"][0] > 0.5
    assert np.all(data["mu"] < 1.0)


def test_verify_exit_codes(tmp_path, monkeypatch, capsys):
    path = _write(tmp_path, {"criteria": [10]})
    assert cli.main(["Verify", "--config", path, "--out", str(tmp_path / "v")]) == 0
    report = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert report["passed"] and report["criteria"][0]["number"] == 10
    assert "[PASS] criterion 10" in capsys.readouterr().out

    def failing():
        return verify.CriterionResult(1, "always_fails", False, "none", "none", {}, "forced failure")

    monkeypatch.setattr(verify, "ALL_CHECKS", (failing,))
    assert cli.main(["Verify", "--config", _write(tmp_path, {"criteria": [1]}), "--out", str(tmp_path / "w")]) == 2


@pytest.mark.skipif(shutil.which("conilay") is None, reason="console script not installed")
def test_console_script(tmp_path):
    path = _write(tmp_path, {"x_range": [-1.0, 1.0], "n_points": 5})
    proc = subprocess.run(["conilay", "Potential", "--config", path, "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip().endswith("potential.csv")
