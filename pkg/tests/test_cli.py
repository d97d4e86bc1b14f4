import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from sensikit.cli import parse_vector, run, InputError
from sensikit.report import REPORT_SCHEMA, dumps, loads, numeric_fields


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code, report = run(list(argv), stdout=out, stderr=err)
    return code, report, out.getvalue(), err.getvalue()


def test_diff_p1_jacobian():
    code, rep, text, _ = call("diff", "fixtures/p1.nlp", "--at", "p=0")
    assert code == 0
    np.testing.assert_allclose(rep["sensitivity"]["J_x"], [[0.5], [0.5]], atol=1e-12)
    assert json.loads(text) == rep


def test_analyze_p3_cq_truth():
    code, rep, _, _ = call("analyze", "fixtures/p3.nlp", "--at", "p=2")
    assert code == 0
    assert rep["cq"]["LICQ"] is False and rep["cq"]["MFCQ"] is True


def test_diff_p3_needs_degenerate_flag():
    code, rep, text, _ = call("diff", "fixtures/p3.nlp", "--at", "p=2")
    assert code == 2 and "LICQ" in rep["failed"]
    assert rep["status"] == "regularity_not_certified" and rep["cq"]["LICQ"] is False
    assert json.loads(text)["failed"] == rep["failed"]
    code, rep, _, _ = call("diff", "p3", "--at", "p=2", "--degenerate", "--direction", "h=[1]")
    assert code == 0 and rep["directional"]["results"][0]["dx"] == pytest.approx([0.0], abs=1e-9)


def test_directional_kink_with_oracle():
    code, rep, _, _ = call("directional", "p2", "--at", "p=1", "--direction", "h=[-1]", "--oracle")
    assert code == 0
    assert rep["directional"]["dx"][0] == pytest.approx(-1.0, abs=1e-9)
    assert rep["oracle"]["max_error"] <= 1e-6


def test_value_and_path_and_conic():
    code, rep, _, _ = call("value", "p4", "--oracle")
    assert code == 0 and rep["oracle"]["max_error"] <= 1e-4
    code, rep, _, _ = call("path", "p2", "--at", "p=0.5", "--to", "p=1.5", "--steps", "10", "--oracle")
    assert code == 0 and rep["oracle"]["max_error"] <= 1e-6
    (change,) = rep["path"]["active_changes"]
    assert change["dropped"] == [0] and change["p_before"][0] <= 1.0 <= change["p_after"][0]
    code, rep, _, _ = call("conic-diff", "c1", "--db", "[1]")
    assert code == 0
    np.testing.assert_allclose(rep["conic"]["dx"], [0.0, 1.0], atol=1e-7)


@pytest.mark.parametrize("argv", [
    ("diff", "p1", "--bogus"),
    ("diff", "no_such_file.nlp"),
    ("diff", "p1", "--at", "p=[0, 1]"),
    ("directional", "p2", "--at", "p=1"),
    ("path", "p2", "--at", "p=0.5"),
    ("conic-diff", "c1", "--db", "[1, 2]"),
    ("frobnicate", "p1"),
])
def test_input_errors_exit_one(argv):
    code, rep, text, err = call(*argv)
    assert code == 1 and rep is None and text == "" and err.startswith("error:")


def test_malformed_problem_file(tmp_path):
    f = tmp_path / "bad.nlp"
    f.write_text("vars x1\nminimize x1 +* 2\n")
    assert call("solve", str(f))[0] == 1


def test_schema_round_trip():
    for argv in (("analyze", "p4"), ("diff", "p3", "--at", "p=2"), ("conic-diff", "c2", "--dc", "[0,1,0]"),
                 ("path", "p1", "--to", "p=1", "--steps", "3")):
        _, rep, text, _ = call(*argv)
        jsonschema.validate(rep, REPORT_SCHEMA)
        again = loads(text)
        assert dumps(again) == text.rstrip("\n")


def test_schema_rejects_unknown_fields():
    _, rep, _, _ = call("solve", "p1")
    with pytest.raises(jsonschema.ValidationError):
        loads(json.dumps(dict(rep, surprise=1)))


def test_deterministic_numeric_fields():
    a = call("value", "p4", "--oracle")[1]
    b = call("value", "p4", "--oracle")[1]
    assert dumps(numeric_fields(a)) == dumps(numeric_fields(b))


def test_parse_vector_forms():
    for text in ("p=[0, 1]", "[0,1]", "0,1"):
        np.testing.assert_array_equal(parse_vector(text, "p"), [0.0, 1.0])
    with pytest.raises(InputError):
        parse_vector("h=[1]", "p")
    with pytest.raises(InputError):
        parse_vector("p=[[1]]", "p")


def test_console_entry_point_module():
    res = subprocess.run([sys.executable, "-m", "sensikit.cli", "analyze", "p1", "--no-json"],
                         capture_output=True, text=True, timeout=60)
    assert res.returncode == 0 and res.stdout.startswith("analyze p1: ok")
