import json

import pytest

from regnoise import config as cfgmod
from regnoise.cli import main


def _write(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text)
    return str(p)


def test_counterexample_command_writes_envelope(tmp_path, capsys):
    assert main(["counterexample", "--out", str(tmp_path)]) == 0
    env = json.loads((tmp_path / "counterexample" / "summary.json").read_text())
    assert env["passed"] is True
    assert len(env["config_hash"]) == 16
    assert env["config"]["counterexample"]["convention"] == "corrected"
    assert "PASS" in capsys.readouterr().out


def test_printed_convention_fails_with_exit_1(tmp_path):
    path = _write(tmp_path, '[counterexample]\nconvention = "printed"\n')
    assert main(["counterexample", "--config", path, "--out", str(tmp_path)]) == 1


def test_simulate_is_reproducible(tmp_path):
    path = _write(tmp_path, "[spectrum]\nn_modes = 4\n[simulate]\nsteps = 20\npaths = 8\n")
    outs = []
    for name in ("a", "b"):
        assert main(["simulate", "--config", path, "--seed", "3", "--out", str(tmp_path / name)]) == 0
        outs.append(sorted((tmp_path / name / "simulate").glob("*.csv")))
    assert outs[0]
    for a, b in zip(*outs):
        assert a.read_bytes() == b.read_bytes()


def test_unknown_key_suggests_correction(tmp_path, capsys):
    path = _write(tmp_path, "[simulate]\nstep = 20\n")
    assert main(["simulate", "--config", path, "--out", str(tmp_path)]) == 2
    assert "steps" in capsys.readouterr().err


def test_toml_syntax_error_reports_position(tmp_path, capsys):
    path = _write(tmp_path, "[simulate\nsteps = 1\n")
    assert main(["simulate", "--config", path]) == 2
    assert "line 1" in capsys.readouterr().err


def test_wrong_type_rejected():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.resolve({"simulate": {"steps": "many"}}, "simulate")


def test_strict_hypothesis_failure(tmp_path):
    path = _write(tmp_path, "[drift]\nbeta = 0.5\n")
    assert main(["hypotheses", "--config", path]) == 2
    assert main(["counterexample", "--config", path, "--strict", "--out", str(tmp_path)]) == 2


def test_presets_and_hash():
    k = cfgmod.resolve({}, "kolmogorov")
    assert k["spectrum"]["family"] == "torus-d" and k["drift"]["kind"] == "heat-nonlocal"
    assert cfgmod.config_hash(k) == cfgmod.config_hash(cfgmod.resolve({}, "kolmogorov"))
    assert cfgmod.config_hash(k) != cfgmod.config_hash(cfgmod.resolve({"seed": 1}, "kolmogorov"))


def test_list_and_describe(capsys):
    assert main(["list"]) == 0
    assert "fbsde" in capsys.readouterr().out
    assert main(["describe", "fbsde"]) == 0
    assert main(["describe", "fbsd"]) == 2
    assert "fbsde" in capsys.readouterr().err
