from __future__ import annotations

import json

import pytest

from pinlat import __version__
from pinlat.cli import DEFAULT_CONFIG, run


@pytest.fixture
def cubic_cfg(tmp_path):
    p = tmp_path / "cubic.json"
    p.write_text(json.dumps({"family": {"kind": "cubic"}}))
    return str(p)


def _json(path):
    return json.loads(path.read_text())


def test_condition_b_end_to_end(tmp_path, cubic_cfg):
    out = tmp_path / "out"
    assert run(["condition-b", "--config", cubic_cfg, "--output-dir", str(out), "--quiet"]) == 0
    doc = _json(out / "condition_b.json")
    assert doc["result"]["verdict"] == "ConditionBHolds"
    assert doc["version"] == f"pinlat {__version__}"
    assert doc["config"]["N"] == DEFAULT_CONFIG["N"]
    assert (out / "kernel_vector.csv").read_text().startswith("n,v\n")


def test_validate_rejects_sign_changing_gamma(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"family": {"kind": "perturbed", "gamma": [0.2, 1.0]}}))
    assert run(["validate", "--config", str(bad), "--output-dir", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"


def test_validate_invalid_family_exit1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"family": {"kind": "custom", "coefficients": [[-0.5], [0], [0], [1]]}}))
    assert run(["validate", "--config", str(bad), "--output-dir", str(tmp_path), "--quiet"]) == 1
    assert _json(tmp_path / "validate.json")["result"]["valid"] is False


def test_standing_wave_outside_interval(tmp_path, cubic_cfg, capsys):
    code = run(["standing-wave", "--a", "0.95", "--config", cubic_cfg, "--output-dir", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "NoConvergence"


def test_usage_errors(tmp_path):
    assert run([]) == 1
    assert run(["nonsense"]) == 1
    assert run(["validate", "--N", "5", "--output-dir", str(tmp_path)]) == 1
    assert run(["simulate", "--direction", "1/x", "--output-dir", str(tmp_path)]) == 1
    assert run(["validate", "--config", str(tmp_path / "missing.json")]) == 1


def test_deterministic_outputs(tmp_path):
    names = ("standing_wave.csv", "standing_wave.json", "reduced_orbit.csv", "reduced_map.json")
    snaps = []
    for _ in range(2):
        assert run(["standing-wave", "--a", "0.001", "--output-dir", str(tmp_path), "--quiet"]) == 0
        assert run(["reduced-map", "--steps", "500", "--output-dir", str(tmp_path), "--quiet"]) == 0
        snaps.append([(tmp_path / n).read_bytes() for n in names])
    assert snaps[0] == snaps[1]


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 60, "standing_wave": {"a": 0.002}}))
    assert run(["standing-wave", "--config", str(cfg), "--N", "50", "--output-dir", str(tmp_path), "--quiet"]) == 0
    doc = _json(tmp_path / "standing_wave.json")
    assert doc["config"]["N"] == 50
    assert doc["result"]["a"] == 0.002
    assert doc["result"]["half_width"] == 50


def test_simulate_and_summary(tmp_path, capsys):
    assert run(["simulate", "--a", "0.06", "--t-end", "200", "--output-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("simulate:")
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,xi_star\n")


def test_spectral_interior(tmp_path):
    assert run(["spectral", "--a", "0", "--output-dir", str(tmp_path), "--quiet"]) == 0
    assert _json(tmp_path / "spectral.json")["result"]["lambda0"] < -1e-3


@pytest.mark.slow
def test_full_report(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sweep_theta": {"directions": ["0/1", "1/4"]}, "tolerances": {"a_plus": 2.5e-3}}))
    code = run(["full-report", "--config", str(cfg), "--threads", "2", "--output-dir", str(tmp_path), "--quiet"])
    assert code == 0
    rep = _json(tmp_path / "full_report.json")["result"]
    assert rep["crystallographic_pinning_predicted_theta0"] == "yes"
    assert (tmp_path / "sweep_theta.csv").exists()
