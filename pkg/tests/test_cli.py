import csv
import io
import json

import numpy as np
import pytest

from g2calib.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_dirac_zero_holonomy(capsys):
    code, out, _ = run(capsys, "dirac", "--holonomy", "0,0,0", "--K", "2")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2 * 5**3
    ev = np.array([float(r["eigenvalue"]) for r in rows])
    assert np.sum(np.abs(ev) < 1e-12) == 2


def test_dirac_json(capsys):
    code, out, _ = run(capsys, "dirac", "--K", "1", "--holonomy", "3.14159,0,0", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == 1 and doc["kernel_dim"] == 0
    assert all("anchor" in c for c in doc["checks"])


def test_sample_zero(capsys):
    code, out, _ = run(capsys, "sample", "0")
    assert code == 0 and out == "seed,phi_value,chi_defect,iterations\n"


def test_sample_is_deterministic(capsys):
    _, a, _ = run(capsys, "sample", "2", "--seed", "7")
    _, b, _ = run(capsys, "sample", "2", "--seed", "7")
    assert a == b and len(a.strip().split("\n")) == 3


def test_flow(capsys):
    code, out, _ = run(capsys, "flow", "--seed", "3")
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "pass" and len(doc["plane"]) == 21


def test_flow_failure_exit_code(capsys):
    code, out, err = run(capsys, "flow", "--steps", "1")
    assert code == 1 and "check failed" in err
    assert json.loads(out)["checks"][0]["status"] == "fail"


def test_sw_trace_and_state(capsys, tmp_path):
    state = tmp_path / "state.json"
    code, out, _ = run(capsys, "sw", "--K", "1", "--state-out", str(state))
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["iteration", "energy", "step"]
    e = [float(r["energy"]) for r in rows]
    assert all(b <= a for a, b in zip(e, e[1:]))
    assert json.loads(state.read_text())["cutoff"] == 1


def test_verify_subset(capsys, tmp_path):
    out = tmp_path / "report.json"
    code, _, _ = run(capsys, "verify", "--only", "sigma closed form", "--only", "div-curl index",
                     "--out", str(out))
    doc = json.loads(out.read_text())
    assert code == 0 and [c["name"] for c in doc["checks"]] == ["sigma closed form", "div-curl index"]


def test_verify_csv(capsys):
    code, out, _ = run(capsys, "verify", "--only", "g2 dimension", "--format", "csv")
    assert code == 0 and out.startswith("name,anchor,status")


@pytest.mark.parametrize("argv", [
    ["dirac", "--bogus"],
    ["sample", "-1"],
    ["dirac", "--holonomy", "1,2"],
    ["dirac", "--K", "0"],
    ["verify", "--tol", "-1"],
    ["nonsense"],
    [],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_unwritable_output(capsys):
    code, _, err = run(capsys, "dirac", "--K", "1", "--out", "/nonexistent/dir/x.csv")
    assert code == 2 and "cannot write" in err
