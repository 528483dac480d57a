import json

import pytest

from sphereflow.cli import main
from sphereflow.io import read_manifest

SMALL = 'k_max = 6\nhorizon = 0.5\nsnapshot_every = 0.1\noutput = "{out}"\n[perturbation]\namplitude = 1e-3\n'


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL.format(out=tmp_path / "runs"))
    return str(p)


def test_print_config(capsys):
    assert main(["--print-config"]) == 0
    out = capsys.readouterr().out
    assert "k_max = 16" in out and "[tolerances]" in out


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["verify"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["verify", "nonsense"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--dt", "0.5"])
    assert e.value.code == 2
    assert "dt must lie" in capsys.readouterr().err


def test_simulate_is_bit_reproducible(cfg, tmp_path, capsys):
    assert main(["--config", cfg, "simulate", "--seed", "4", "--out", str(tmp_path / "a")]) == 0
    assert main(["--config", cfg, "simulate", "--seed", "4", "--out", str(tmp_path / "b")]) == 0
    assert main(["--config", cfg, "simulate", "--seed", "5", "--out", str(tmp_path / "c")]) == 0
    a, b, c = (read_manifest(tmp_path / x) for x in "abc")
    assert a["content_hash"] == b["content_hash"] != c["content_hash"]
    assert a["seeds"] == [4]


def test_round_simulation_is_stationary(cfg, tmp_path, capsys):
    assert main(["--config", cfg, "simulate", "--base", "round", "--out", str(tmp_path / "r")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["snapshots"] == 6 and report["stopped"] is None


def test_solver_failure_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text(f'k_max = 6\nhorizon = 8.0\noutput = "{tmp_path}"\n'
                 '[perturbation]\nkind = "modes"\namplitude = 1.0\nmodes = [[0, 0, -1.0]]\n')
    # an inward dilation mode grows like e^t until the surface collapses
    assert main(["--config", str(p), "simulate", "--base", "round", "--seed", "0",
                 "--out", str(tmp_path / "x")]) == 1
    assert "solver failure" in capsys.readouterr().err
    assert read_manifest(tmp_path / "x")["meta"]["stopped"]


def test_verify_named_suite(capsys):
    assert main(["verify", "similarity"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] similarity" in out
