import json
import math

import numpy as np
import pytest

from qchlab.families import SINGULAR_DISTANCE, Family
from qchlab.harness import (Config, ConfigError, SamplingError, run, sample_array, sample_points)
from qchlab.suites import Outcome, REGISTRY, applicable, resolve

THM1 = {"family": "thm1", "h": "1", "H": {"expr": "exp((x^2+y^2)/2)"}, "samples": 30, "seed": 7}
THM2 = {"family": "thm2", "h": "1", "H": {"expr": "1/sqrt(2)"}, "samples": 30, "seed": 7}


@pytest.fixture(scope="module")
def thm1_report():
    return run(Config.from_dict(THM1))


def test_sampling_respects_margin():
    box = {"x": (-1, 1), "y": (-1, 1), "z": (-3, -0.02), "t": (0, 4 * math.pi)}
    pts = sample_array(box, 3, 200, SINGULAR_DISTANCE[Family.THM1], 0.05)
    assert len(pts) == 200 and np.all(pts[:, 2] <= -0.05)


def test_sampling_is_deterministic_and_seeded():
    box = {"x": (-1, 1), "y": (-1, 1), "z": (-3, -0.5), "t": (0, 1)}
    assert sample_points(box, 4, 25) == sample_points(box, 4, 25)
    assert sample_points(box, 4, 25) != sample_points(box, 5, 25)
    assert sample_points(box, 4, 0) == []


def test_sampling_fails_when_box_is_mostly_singular():
    box = {"x": (-1, 1), "y": (-1, 1), "z": (-0.0501, -0.04), "t": (0, 1)}
    with pytest.raises(SamplingError):
        sample_array(box, 0, 10, SINGULAR_DISTANCE[Family.THM1], 0.05)


@pytest.mark.parametrize("bad, msg", [
    ({"family": "thm9"}, "unknown family"),
    ({**THM1, "bogus": 1}, "unknown config keys"),
    ({**THM1, "samples": -1}, "samples"),
    ({**THM1, "tolerances": {"nope": 1}}, "tolerance"),
    ({**THM1, "box": {"z": [0, -1]}}, "empty"),
    ({"family": "thm1", "h": "1"}, "'H'"),
    ({"family": "custom"}, "coframe"),
])
def test_config_validation(bad, msg):
    with pytest.raises(ConfigError, match=msg):
        Config.from_dict(bad)


def test_config_load_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        Config.load(p)
    with pytest.raises(ConfigError):
        Config.load(tmp_path / "missing.json")


def test_first_family_passes_everything(thm1_report):
    assert thm1_report.verdict == "PASS" and thm1_report.exit_code == 0
    ss = thm1_report.suite("thm1_semi_symmetric")
    assert ss.verdict is Outcome.PASS and ss.max_residual <= 1e-8
    names = {s.name for s in thm1_report.suites}
    assert {"thm1_alpha_law", "thm1_gray_conditions", "thm1_qch", "thm1_not_lck", "thm1_dd_zero"} <= names


def test_second_family_reports_negative_results_as_passes():
    rep = run(Config.from_dict(THM2))
    assert rep.verdict == "PASS"
    assert rep.suite("thm2_not_semi_symmetric").verdict is Outcome.PASS
    assert rep.suite("thm2_alpha_law_violated").verdict is Outcome.PASS
    # E1 carries a d/dz part, so alpha still varies along it and d theta is nonzero even with constant H
    assert rep.suite("thm2_not_lck").verdict is Outcome.PASS


def test_custom_family_runs_only_universal_suites():
    rep = run(Config.from_dict({"family": "custom", "coframe": {"random": 3}, "samples": 20}))
    assert rep.verdict == "PASS"
    assert {s.name for s in rep.suites} == {f"custom_{k}" for k in applicable(Family.CUSTOM)}
    assert "custom_gray_hervella" in {s.name for s in rep.suites}


def test_suite_selection_and_unknown_names():
    rep = run(Config.from_dict({**THM1, "suites": ["lee_form", "thm1_qch"]}))
    assert [s.name for s in rep.suites] == ["thm1_lee_form", "thm1_qch"]
    with pytest.raises(ConfigError):
        run(Config.from_dict(THM1), suites=["no_such_suite"])
    with pytest.raises(KeyError):
        resolve(["qch"], Family.CUSTOM)
    assert resolve(["not_semi_symmetric"], Family.THM2) == resolve(["thm2_not_semi_symmetric"], Family.THM2)


def test_zero_samples_gives_inconclusive():
    rep = run(Config.from_dict({**THM1, "samples": 0, "suites": ["lee_form"]}))
    assert rep.verdict == "INCONCLUSIVE" and rep.exit_code == 2


def test_failing_suite_yields_fail_verdict():
    # H does not satisfy the profile equation, so the PDE suite must fail
    rep = run(Config.from_dict({**THM1, "H": {"expr": "exp(x^2)"}, "h": "2", "suites": ["profile_pde"]}))
    assert rep.verdict == "FAIL" and rep.exit_code == 1
    s = rep.suite("thm1_profile_pde")
    assert s.max_residual > 1 and s.worst_point is not None


def test_solver_failure_is_captured_as_error():
    cfg = {**THM1, "family": "thm3", "H": {"solve": {"grid": 33, "boundary": "-1", "max_iter": 1}}}
    rep = run(Config.from_dict(cfg))
    assert rep.verdict == "ERROR" and rep.exit_code == 3
    assert all(s.verdict is Outcome.FAIL and s.error for s in rep.suites)
    assert rep.solver and rep.solver["history"]


def test_report_is_reproducible(thm1_report):
    again = run(Config.from_dict(THM1))
    assert again.to_json(timing=False) == thm1_report.to_json(timing=False)


def test_report_structure(thm1_report, tmp_path):
    d = thm1_report.to_dict()
    assert d["global_verdict"] == "PASS"
    row = d["suites"][0]
    for key in ("name", "anchor", "verdict", "max_residual", "tolerance", "worst_point", "samples", "wall_time"):
        assert key in row
    assert len(d["columns"]["x"]) == 30
    path = tmp_path / "r.json"
    thm1_report.write(path)
    assert json.loads(path.read_text())["family"] == "thm1"
    assert "thm1_qch" in thm1_report.table()


def test_grid_backed_run_uses_grid_tier(tmp_path):
    cfg = {"family": "thm3", "h": "1", "samples": 20, "seed": 2, "box": {"z": [-3, -0.5]},
           "H": {"solve": {"grid": 129, "profile": {"left": -1, "right": -1}, "initial": "0"}},
           "suites": ["profile_pde", "lee_form", "gray_hervella"]}
    rep = run(Config.from_dict(cfg))
    assert rep.grid_backed and rep.solver["iterations"] >= 1
    assert rep.suite("thm3_profile_pde").tolerance == pytest.approx(1e-4)
    assert rep.verdict == "PASS"


def test_registry_names_are_unique():
    assert len(REGISTRY) == len(set(REGISTRY))
