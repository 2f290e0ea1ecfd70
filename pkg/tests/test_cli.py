import json
import textwrap
from pathlib import Path

import pytest
import yaml

from viscofix.cli import EXIT_CERTIFICATE, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, fmt, main, to_json
from viscofix.scenario import ScenarioError, ScenarioParseError, dumps, loads, parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

SMALL = """\
dimension: 2
indices:
  - label: rot
    domain: {kind: ball, center: [0, 0], radius: 1}
    rep: {kind: rotation, theta_over_pi: 0.5}
    contraction: {alpha: 0, constant: [0.3, 0.1]}
    mean: {kind: cesaro}
    schedule: {epsilon: harmonic}
    n_outer: 120
    tolerances: {inner_tol: 1.0e-10, family_tol: 5.0e-3, residual_target: 1.0e-2}
    sample_ts: [1, 2]
"""


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def errors_of(text):
    with pytest.raises(ScenarioError) as info:
        loads(text)
    return info.value.errors


def test_minimal_rotation_parses():
    sc = loads(SMALL)
    assert sc.dimension == 2 and len(sc.indices) == 1
    assert sc.indices[0].label == "rot" and sc.seed == 0


def test_alpha_one_rejected():
    errs = errors_of(SMALL.replace("alpha: 0,", "alpha: 1.0,"))
    assert any("alpha must be < 1" in e and "contraction" in e for e in errs)


def test_unknown_rep_kind_lists_allowed():
    errs = errors_of(SMALL.replace("kind: rotation, theta_over_pi: 0.5", "kind: shear"))
    (err,) = [e for e in errs if "shear" in e]
    for kind in ("rotation", "continuous_flow", "discrete_power", "projection_map"):
        assert kind in err


def test_all_errors_reported():
    bad = SMALL.replace("alpha: 0,", "alpha: 1.5,").replace("epsilon: harmonic", "epsilon: geometric")
    bad = bad.replace("n_outer: 120", "n_outer: -3")
    errs = errors_of(bad)
    assert len(errs) >= 3
    joined = "\n".join(errs)
    assert "contraction" in joined and "schedule" in joined and "n_outer" in joined


def test_empty_index_list():
    errs = errors_of("dimension: 2\nindices: []\n")
    assert any("index list" in e for e in errs)


def test_syntax_error_has_line():
    with pytest.raises(ScenarioParseError) as info:
        loads(SMALL.replace("radius: 1}", "radius: 1"), "x.yaml")
    assert "line" in info.value.errors[0]


def test_discrete_rep_rejects_real_times():
    errs = errors_of(SMALL.replace("sample_ts: [1, 2]", "sample_ts: [0.5]"))
    assert any("sample_ts" in e for e in errs)


def test_duplicate_labels():
    doc = yaml.safe_load(SMALL)
    doc["indices"].append(doc["indices"][0])
    errs = errors_of(yaml.safe_dump(doc))
    assert any("duplicate" in e for e in errs)


def test_domain_not_invariant():
    errs = errors_of(SMALL.replace("center: [0, 0], radius: 1", "center: [0.5, 0], radius: 1"))
    assert any("invariant" in e or "rep" in e for e in errs)


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.yaml")), ids=lambda p: p.stem)
def test_round_trip(path):
    sc = parse_scenario(path)
    again = loads(dumps(sc))
    assert again == sc
    assert dumps(again) == dumps(sc)


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_scenarios_validate(path, capsys):
    assert main(["validate", str(path)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok:")


def test_run_small(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, SMALL)), "--out", str(out)]) == EXIT_OK
    rows = (out / "rot.trajectory.csv").read_text().splitlines()
    assert rows[0] == "n,eps,inner_iterations,residual_t=1,residual_t=2,distance_to_limit,gamma,gbh_slack"
    assert len(rows) == 1 + 120
    assert all(len(r.split(",")) == 8 and "nan" not in r for r in rows[1:])
    doc = json.loads((out / "certificate.json").read_text())
    assert doc["status"] == 0 and doc["converged_all"] and doc["certified_all"]
    assert doc["indices"][0]["certificate"]["final_distance"] <= 5e-3
    assert "rot" in capsys.readouterr().out


def test_reports_byte_identical(tmp_path):
    src = write(tmp_path, SMALL)
    for name in ("a", "b"):
        assert main(["run", str(src), "--out", str(tmp_path / name), "--seed", "7"]) == EXIT_OK
    for f in ("rot.trajectory.csv", "certificate.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_jobs_do_not_change_reports(tmp_path, monkeypatch):
    doc = yaml.safe_load(SMALL)
    second = dict(doc["indices"][0], label="rot2", n_outer=80)
    doc["indices"].append(second)
    src = write(tmp_path, yaml.safe_dump(doc))
    assert main(["run", str(src), "--out", str(tmp_path / "serial")]) == EXIT_OK
    monkeypatch.setenv("VISCOFIX_JOBS", "2")
    assert main(["run", str(src), "--out", str(tmp_path / "par")]) == EXIT_OK
    for f in ("rot.trajectory.csv", "rot2.trajectory.csv", "certificate.json"):
        assert (tmp_path / "serial" / f).read_bytes() == (tmp_path / "par" / f).read_bytes()


def test_negative_control_exit(tmp_path, capsys):
    out = tmp_path / "neg"
    status = main(["run", str(SCENARIOS / "negative_control.yaml"), "--out", str(out)])
    assert status == EXIT_CERTIFICATE
    failure = json.loads(capsys.readouterr().err)
    assert failure["status"] == EXIT_CERTIFICATE
    reasons = failure["failures"][0]["reasons"]
    assert any("gbh" in r for r in reasons)
    assert json.loads((out / "certificate.json").read_text())["failures"] == failure["failures"]


def test_residual_target_miss_is_numerical(tmp_path, capsys):
    src = write(tmp_path, SMALL.replace("residual_target: 1.0e-2", "residual_target: 1.0e-9"))
    assert main(["run", str(src), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL
    err = json.loads(capsys.readouterr().err)
    assert err["failures"][0]["reasons"] == ["residual_target not met"]


def test_validation_error_writes_nothing(tmp_path, capsys):
    src = write(tmp_path, "dimension: 2\nindices: []\n")
    out = tmp_path / "never"
    assert main(["run", str(src), "--out", str(out)]) == EXIT_VALIDATION
    assert not out.exists()
    assert "validation error" in capsys.readouterr().err


def test_io_errors(tmp_path):
    assert main(["validate", str(tmp_path / "missing.yaml")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(write(tmp_path, SMALL)), "--out", str(blocker / "sub")]) == EXIT_IO


def test_oracle_check(capsys):
    assert main(["oracle-check", str(SCENARIOS / "flow_integral.yaml")]) == EXIT_OK
    assert "pass" in capsys.readouterr().out


def test_formatting():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3" and fmt(True) == "true"
    assert float(fmt(1 / 3)) == 1 / 3
    text = to_json({"a": [1.5, None], "b": {"c": float("nan")}})
    assert json.loads(text) == {"a": [1.5, None], "b": {"c": None}}
