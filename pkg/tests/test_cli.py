import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kkcartan import fixtures as fx
from kkcartan.cli import ConfigError, JobConfig, main, parse_point
from kkcartan.report import Check, ReportBundle


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- reports --------------------------------------------------------------------


def test_check_relations():
    assert Check("a", 1.0, 1.0 + 1e-9, 1e-8, "x").passed
    assert not Check("a", 1.0, 1.1, 1e-8, "x").passed
    assert Check("b", 0.5, 0.0, 1.0, "x", "le").passed
    assert not Check("b", 1.5, 0.0, 1.0, "x", "le").passed
    assert Check("c", 2.1, 2.0, 0.0, "x", "ge").passed
    assert not Check("c", 1.9, 2.0, 0.0, "x", "ge").passed
    assert not Check("d", math.nan, 0.0, 1.0, "x").passed
    assert not Check("e", None, None, 1.0, "x").passed
    with pytest.raises(ValueError):
        Check("f", 0.0, 0.0, -1.0, "x")
    with pytest.raises(ValueError):
        Check("g", 0.0, 0.0, 1.0, "x", "approx")


def test_failed_check_carries_the_error():
    c = Check.failed("job", RuntimeError("boom"))
    assert not c.passed and "RuntimeError: boom" in c.detail


def test_empty_bundle_is_valid_json():
    b = ReportBundle.new("suite")
    d = json.loads(b.to_json())
    assert d["checks"] == [] and d["summary"]["pass"] is True
    assert b.exit_code == 0
    assert b.to_csv().strip() == "name,value,reference,tolerance,relation,pass,provenance,detail"


def test_failing_check_gives_false_row_and_exit_one():
    b = ReportBundle.new("curvature", "kasner").extend([Check("ok", 1.0, 1.0, 0.1, "x"),
                                                        Check("bad", 2.0, 1.0, 0.1, "x")])
    table = rows(b.to_csv())
    assert [r["pass"] for r in table] == ["true", "false"]
    assert b.exit_code == 1


def test_metadata_names_every_convention():
    meta = ReportBundle.new("weyl").metadata
    assert {"orientation", "p_gamma_reading", "wave_map_coefficient", "conformal_gauge_constant"} <= set(
        meta["conventions"])
    assert {"kkcartan", "numpy", "scipy", "jax"} <= set(meta["versions"])


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
check_strategy = st.builds(Check, st.text(max_size=12), st.one_of(st.none(), finite), st.one_of(st.none(), finite),
                           st.floats(0, 1e6), st.sampled_from(["closed form", "oracle"]),
                           st.sampled_from(["abs", "le", "ge"]), st.text(max_size=8))


@given(st.lists(check_strategy, max_size=6), st.one_of(st.none(), st.fixed_dictionaries({"value": finite})))
def test_json_round_trip(checks, result):
    b = ReportBundle.new("suite", "fixtures")
    b.extend(checks)
    b.result = result
    back = ReportBundle.from_json(b.to_json())
    assert back == b
    assert back.to_json() == b.to_json()


@given(finite)
def test_csv_floats_are_exact(v):
    b = ReportBundle([Check("x", v, v, 0.0, "p")])
    assert float(rows(b.to_csv())[0]["value"]) == v


# -- config ---------------------------------------------------------------------


def test_config_validation_names_fields(tmp_path):
    with pytest.raises(ConfigError, match="job"):
        JobConfig(job="plot")
    with pytest.raises(ConfigError, match="tol"):
        JobConfig(job="curvature", tol=0.0)
    with pytest.raises(ConfigError, match="format"):
        JobConfig(job="curvature", format="xml")
    with pytest.raises(ConfigError, match="input"):
        JobConfig(job="weyl", input=str(tmp_path / "missing.npz"))
    with pytest.raises(ConfigError, match="unknown field 'points_'"):
        JobConfig.from_mapping({"job": "curvature", "points_": []})


def test_config_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "job.json"
    path.write_text('{"job": "curvature",\n "fixture": "minkowski4"\n "tol": 1}')
    code, _, err = run(capsys, "curvature", "--config", str(path))
    assert code == 2
    assert "line 3" in err


def test_config_file_and_flag_override(tmp_path, capsys):
    path = tmp_path / "job.json"
    path.write_text(json.dumps({"job": "curvature", "fixture": "kasner:2/3,2/3,-1/3", "points": ["t=2"],
                                "format": "csv"}))
    code, out, _ = run(capsys, "curvature", "--config", str(path), "--point", "t=1")
    assert code == 0
    assert all("t=1," in r["name"] for r in rows(out))
    code, _, err = run(capsys, "weyl", "--config", str(path))
    assert code == 2 and "job" in err


def test_point_defaults():
    chart = fx.schwarzschild(1.0).chart
    x = parse_point("t=1", chart)
    assert x[0] == 1.0
    assert x[1] == pytest.approx(np.mean(chart.domain_box[1]))  # r = 0 is outside the box
    assert x[3] == 0.0
    np.testing.assert_array_equal(parse_point("1,4,1,0", chart), [1, 4, 1, 0])
    for bad, field in [("q=1", "coordinate"), ("1,2", "expected 4"), ("t=1,2", "mix"), ("t=1,r=1", "outside")]:
        with pytest.raises(ConfigError, match=field):
            parse_point(bad, chart)


# -- jobs -----------------------------------------------------------------------


def test_kasner_curvature_row(capsys):
    code, out, _ = run(capsys, "curvature", "--fixture", "kasner:2/3,2/3,-1/3", "--point", "t=2", "--format", "csv")
    assert code == 0
    row = next(r for r in rows(out) if r["name"].startswith("Riem^1_212["))
    assert float(row["value"]) == pytest.approx(1 / 9, abs=1e-8)
    assert row["pass"] == "true"


def test_finite_difference_curvature(capsys):
    code, out, _ = run(capsys, "curvature", "--fixture", "schwarzschild(1)", "--point", "r=4,theta=1.2",
                       "--fd-step", "1e-3", "--format", "csv")
    assert code == 0
    assert rows(out)[0]["tolerance"] == "0.0001"


@pytest.mark.parametrize("fixture", ["kasner:2/3,2/3", "kasner(a,b,c)", "torus", "perturbed(", ""])
def test_malformed_fixture(capsys, fixture):
    code, out, err = run(capsys, "curvature", "--fixture", fixture)
    assert code == 2 and out == ""
    assert "fixture" in err


def test_output_is_byte_stable(tmp_path, capsys):
    paths = [tmp_path / f"r{i}.csv" for i in range(2)]
    for p in paths:
        assert main(["curvature", "--fixture", "equivariant(0.3*sin(t)*r,0.1*r*r)", "--point", "t=0.2,r=1",
                     "--format", "csv", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert capsys.readouterr().out == ""


def test_reduce_job(capsys):
    code, out, _ = run(capsys, "reduce", "--fixture", "polarized", "--point", "t=0.3,x1=-0.4,x2=0.5", "--format", "csv")
    assert code == 0
    assert {r["name"].split("[")[0] for r in rows(out)} == {
        "riemann_blocks", "ricci_horizontal", "ricci_mixed", "ricci_fibre", "scalar_curvature"}


def test_reduce_from_input_file(tmp_path, capsys):
    path = tmp_path / "kk.json"
    path.write_text(json.dumps({"chart": {"coords": ["t", "x", "y"], "box": [[-1, 1]] * 3},
                                "gamma": "0.1*x*y", "A": ["0", "0", "0.8*x"]}))
    code, out, _ = run(capsys, "reduce", "--input", str(path), "--format", "csv")
    assert code == 0 and len(rows(out)) == 5
    path.write_text(json.dumps({"gamma": "0"}))
    code, _, err = run(capsys, "reduce", "--input", str(path))
    assert code == 2 and "'chart'" in err


def test_constraint_job_exit_codes(capsys):
    assert run(capsys, "constraints", "--fixture", "kasner:2/3,2/3,-1/3", "--point", "t=1.2")[0] == 0
    code, out, _ = run(capsys, "constraints", "--fixture", "synthetic", "--grid", "16", "--format", "csv")
    assert code == 1
    assert {r["pass"] for r in rows(out)} == {"false"}
    code, _, err = run(capsys, "constraints", "--fixture", "kasner:2/3,2/3,-1/3", "--point", "t=-1")
    assert code == 2 and "point" in err


def test_constraint_job_reads_saved_state(tmp_path, capsys):
    from kkcartan.adm_phase_space import kasner_slice, save_state

    path = save_state(kasner_slice(-1 / 3, 2 / 3, 2 / 3, 1.5)[0], tmp_path / "state.npz")
    assert run(capsys, "constraints", "--input", str(path))[0] == 0


def test_weyl_job_kasner(capsys):
    code, out, _ = run(capsys, "weyl", "--fixture", "kasner:2/3,2/3,-1/3", "--point", "t=2", "--format", "json")
    assert code == 0
    names = {c["name"] for c in json.loads(out)["checks"]}
    assert {"kasner.E_11", "kasner.B_sup", "bel_robinson_density_min"} <= names


def test_wave_job_record(capsys):
    code, out, _ = run(capsys, "wave", "--dim", "3", "--probe", "0.1,0.2,0.3,0.7", "--data", "plane:1,1,1")
    assert code == 0
    result = json.loads(out)["result"]
    assert set(result) == {"value", "error_estimate", "iterate_history"}
    assert result["value"] == pytest.approx(np.sin(0.6 - np.sqrt(3) * 0.7), abs=1e-8)


def test_wave_job_from_expression_file(tmp_path, capsys):
    path = tmp_path / "data.json"
    path.write_text(json.dumps({"u1": "1", "source": "2"}))
    code, out, _ = run(capsys, "wave", "--dim", "2", "--probe", "0.1,0.1,0.5", "--data", str(path))
    assert code == 0
    # u = t + 2 t^2 / 2
    assert json.loads(out)["result"]["value"] == pytest.approx(0.5 + 0.25, abs=1e-8)


def test_wave_job_errors(capsys):
    code, _, err = run(capsys, "wave", "--dim", "2", "--probe", "0,0", "--data", "bump")
    assert code == 2 and "probe" in err
    code, _, err = run(capsys, "wave", "--probe", "0,0,0,1", "--data", "spiral")
    assert code == 2 and "data" in err
    code, _, err = run(capsys, "wave", "--probe", "0,0,0,1", "--quad", "sphere=2x2")
    assert code == 2 and "quad" in err
    # an unsettled quadrature becomes a failing check rather than a crash
    code, out, _ = run(capsys, "wave", "--dim", "2", "--probe", "0,0,5", "--data", "bump", "--format", "csv")
    assert code == 1 and "QuadratureError" in rows(out)[0]["detail"]


def test_suite_subset_and_threads(capsys, monkeypatch):
    monkeypatch.setenv("KKCARTAN_THREADS", "2")
    code, out, _ = run(capsys, "suite", "--criteria", "2,7", "--format", "csv")
    assert code == 0
    names = [r["name"] for r in rows(out)]
    assert names[0].startswith("c02.") and names[-1].startswith("c07.")
    monkeypatch.setenv("KKCARTAN_THREADS", "zero")
    assert run(capsys, "suite", "--criteria", "2")[0] == 2


def test_suite_argument_errors(capsys):
    code, _, err = run(capsys, "suite", "--criteria", "12")
    assert code == 2 and "criteria" in err
    code, _, err = run(capsys, "suite")
    assert code == 2 and "--all" in err


def test_criterion_errors_are_aggregated(monkeypatch):
    from kkcartan import suite

    def broken():
        raise RuntimeError("solver exploded")

    crit = suite.Criterion(99, "broken", broken)
    checks = suite.run_criterion(crit)
    assert len(checks) == 1 and not checks[0].passed
    assert checks[0].name == "c99.broken" and "solver exploded" in checks[0].detail
