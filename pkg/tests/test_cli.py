import json
import subprocess
import sys

import numpy as np
import pytest

from qchlab.cli import main
from qchlab.solver import read_grid

THM1 = {"family": "thm1", "h": "1", "H": {"expr": "exp((x^2+y^2)/2)"}, "samples": 20, "seed": 3}


def write(tmp_path, d, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def test_verify_pass_and_report(tmp_path, capsys):
    cfg = write(tmp_path, {**THM1, "report_path": "out.json"})
    assert main(["verify", "--config", str(cfg)]) == 0
    assert "thm1_semi_symmetric" in capsys.readouterr().out
    assert json.loads((tmp_path / "out.json").read_text())["global_verdict"] == "PASS"
    other = tmp_path / "other.json"
    assert main(["verify", "--config", str(cfg), "--report", str(other), "--suites", "qch,lee_form"]) == 0
    assert [s["name"] for s in json.loads(other.read_text())["suites"]] == ["thm1_qch", "thm1_lee_form"]


def test_verify_exit_codes(tmp_path):
    bad = write(tmp_path, {**THM1, "h": "2", "suites": ["profile_pde"]})
    assert main(["verify", "--config", str(bad)]) == 1
    empty = write(tmp_path, {**THM1, "samples": 0, "suites": ["lee_form"]}, "e.json")
    assert main(["verify", "--config", str(empty)]) == 2
    assert main(["verify", "--config", str(tmp_path / "nope.json")]) == 3
    assert main(["verify", "--config", str(bad), "--suites", "nonsense"]) == 3


def test_solve_h_writes_grid(tmp_path, capsys):
    out = tmp_path / "u.grid"
    assert main(["solve-h", "--family", "thm1", "--grid", "33", "--boundary", "(x^2+y^2)/2", "--out", str(out)]) == 0
    g = read_grid(out)
    X, Y = g.mesh()
    assert np.max(np.abs(g.values - (X**2 + Y**2) / 2)) <= 1e-10
    assert "iterations" in capsys.readouterr().out


def test_solve_h_profile_then_verify_from_grid(tmp_path):
    out = tmp_path / "u.grid"
    assert main(["solve-h", "--family", "thm3", "--grid", "65", "--out", str(out)]) == 0
    cfg = write(tmp_path, {"family": "thm3", "h": "1", "H": {"grid_path": "u.grid"}, "samples": 15,
                           "box": {"z": [-3, -0.5]}, "suites": ["profile_pde", "lee_form"]})
    assert main(["verify", "--config", str(cfg)]) == 0


def test_solve_h_bad_expression(tmp_path, capsys):
    assert main(["solve-h", "--family", "thm1", "--h", "x +", "--out", str(tmp_path / "u")]) == 3
    assert "error" in capsys.readouterr().err


def test_sample_is_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, THM1)
    main(["sample", "--config", str(cfg)])
    a = json.loads(capsys.readouterr().out)
    main(["sample", "--config", str(cfg)])
    assert json.loads(capsys.readouterr().out) == a
    assert len(a) == 20 and all(p["z"] <= -0.05 for p in a)


def test_console_script_entry_point(tmp_path):
    cfg = write(tmp_path, {**THM1, "suites": ["lee_form"]})
    r = subprocess.run([sys.executable, "-m", "qchlab.cli", "verify", "--config", str(cfg)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
