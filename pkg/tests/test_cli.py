import json
from importlib import resources

import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner

from solvlin import cli
from solvlin.flows import read_trajectory_csv
from solvlin.reach import VerificationReport

SYSTEMS = {
    1: {"a": 1, "b": 0, "alpha": 0, "beta": 1, "omega": [-1, 1]},
    2: {"a": 0, "b": -1, "alpha": 0, "beta": 1, "omega": [-1, 2]},
    3: {"a": 1, "b": -1, "alpha": 1, "beta": 1, "omega": [-1, 1]},
    4: {"a": 1, "b": 0, "alpha": 1, "beta": 1, "omega": [-1, 1]},
    5: {"a": 1, "b": -1, "alpha": 1, "beta": 0, "omega": [-1, 1]},
}


def schema(name):
    return json.loads(resources.files("solvlin").joinpath(f"schemas/{name}.schema.json").read_text())


def run(*args):
    return CliRunner().invoke(cli.main, [str(a) for a in args], catch_exceptions=False)


@pytest.mark.parametrize("case", sorted(SYSTEMS))
def test_classify_output_validates(case):
    res = run("classify", "--system", json.dumps(SYSTEMS[case]))
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    jsonschema.validate(doc, schema("classify"))
    assert doc["case"] == case


def test_classify_vertical_lines_interval_is_strict_json():
    doc = json.loads(run("classify", "--system", json.dumps(SYSTEMS[1])).output)
    assert doc["description"]["interval"] == [0.5, None]


def test_classify_reads_file_and_omega_override(tmp_path):
    f = tmp_path / "sys.json"
    f.write_text(json.dumps(SYSTEMS[2]))
    doc = json.loads(run("classify", "--system", f, "--omega", "-2,1").output)
    assert doc["system"]["omega"] == [-2.0, 1.0]


@pytest.mark.parametrize(
    "system, needle",
    [
        ({"a": 1, "b": 0, "alpha": 0, "beta": 0, "omega": [-1, 1]}, "(alpha, beta) != (0, 0)"),
        ({"a": 0, "b": 0, "alpha": 1, "beta": 0, "omega": [-1, 1]}, "(a, b) != (0, 0)"),
        ({"a": 1, "b": 0, "alpha": 1, "beta": 0, "omega": [0, 1]}, "omega_lo < 0 < omega_hi"),
        ({"a": 1, "b": 0, "alpha": 1}, "missing"),
    ],
)
def test_invalid_system_exit_code(system, needle):
    res = run("classify", "--system", json.dumps(system))
    assert res.exit_code == 2
    assert needle in res.output


def test_missing_system():
    assert run("classify").exit_code == 2


def test_simulate_csv_and_audit(tmp_path):
    ctrl = tmp_path / "ctrl.csv"
    ctrl.write_text("dt,u\n3,0\n")
    out = tmp_path / "traj.csv"
    sys_json = '{"a": 1, "b": 0, "alpha": 1, "beta": 0, "omega": [-1, 1]}'
    res = run("simulate", "--system", sys_json, "--point", "2,0", "--control", ctrl,
              "--audit", "--substeps", 4, "--out", out)
    assert res.exit_code == 0, res.output
    data = read_trajectory_csv(out)
    assert list(data) == ["t", "x", "y", "u", "x_rk4", "y_rk4"]
    assert len(data["t"]) == 5
    assert data["y"][-1] == pytest.approx(3.0, abs=1e-14)
    np.testing.assert_allclose(data["y_rk4"], data["y"], atol=1e-9)


def test_simulate_json_control(tmp_path):
    ctrl = tmp_path / "ctrl.json"
    ctrl.write_text("[[0.5, 1.0], [0.5, -1.0]]")
    res = run("simulate", "--system", json.dumps(SYSTEMS[5]), "--point", "1,0", "--control", ctrl)
    assert res.exit_code == 0
    assert res.output.splitlines()[0] == "t,x,y,u"


@pytest.mark.parametrize(
    "rows, needle",
    [("1,5\n", "row 1"), ("1,0\n-1,0\n", "row 2"), ("1,0\nabc\n", "row 2")],
)
def test_simulate_bad_control_rows(tmp_path, rows, needle):
    ctrl = tmp_path / "c.csv"
    ctrl.write_text(rows)
    res = run("simulate", "--system", json.dumps(SYSTEMS[4]), "--point", "1,0", "--control", ctrl)
    assert res.exit_code == 2
    assert needle in res.output


def test_simulate_bad_point():
    res = run("simulate", "--system", json.dumps(SYSTEMS[4]), "--point", "-1,0")
    assert res.exit_code == 2


def test_steer_output_validates():
    res = run("steer", "--system", json.dumps(SYSTEMS[4]), "--point", "0.5,-1", "--target", "2,3")
    assert res.exit_code == 0
    doc = json.loads(res.output)
    jsonschema.validate(doc, schema("steer"))
    assert doc["found"] and doc["terminal_error"] <= 1e-2


def test_steer_barrier_certified():
    sys_json = '{"a": 0, "b": -1, "alpha": 1, "beta": 1, "omega": [-1, 1]}'
    doc = json.loads(run("steer", "--system", sys_json, "--point", "1,0.4", "--target", "1,1").output)
    assert not doc["found"] and doc["method"] == "barrier-certified"


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"system": SYSTEMS[4], "eps": 0.5, "budget": 7}))
    doc = json.loads(run("steer", "--config", cfg, "--point", "1,0", "--target", "2,1", "--eps", 0.25).output)
    assert doc["settings"]["eps"] == 0.25
    assert doc["settings"]["budget"] == 7
    assert doc["settings"]["seed"] == 0


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert run("classify", "--config", cfg).exit_code == 2


def test_verify_output_validates():
    res = run("verify", "--system", json.dumps(SYSTEMS[5]), "--pairs", 3, "--samples", 100)
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    jsonschema.validate(doc, schema("verify"))
    assert doc["violations"] == 0 and doc["case"] == 5


def test_verify_exit_code_on_violations(monkeypatch):
    monkeypatch.setattr(
        cli, "verify_control_set",
        lambda *a, **k: VerificationReport(pairs_tested=1, pairs_steered=0),
    )
    res = run("verify", "--system", json.dumps(SYSTEMS[5]))
    assert res.exit_code == 1
    assert json.loads(res.output)["violations"] == 1


def test_verify_bad_viewport():
    res = run("verify", "--system", json.dumps(SYSTEMS[5]), "--viewport", "1,0,0,1")
    assert res.exit_code == 2


@pytest.mark.parametrize("case", sorted(SYSTEMS))
def test_plot_svg(case):
    res = run("plot", "--system", json.dumps(SYSTEMS[case]), "--trajectories", 3)
    assert res.exit_code == 0, res.output
    assert res.output.startswith("<svg") and res.output.rstrip().endswith("</svg>")
    assert "(1, 0)" in res.output


def test_unwritable_output(tmp_path):
    res = run("classify", "--system", json.dumps(SYSTEMS[4]), "--out", tmp_path / "missing" / "x.json")
    assert res.exit_code == 2
