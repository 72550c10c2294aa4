import json
import os

import pytest

from main import attach_point_values, main
from storage import CORPUS_DIR

CANCEL_FN = os.path.join(CORPUS_DIR, "relucancel.fn")


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


@pytest.mark.parametrize("at, expected", [("0", "gradient = (1)"), ("7", "gradient = (0)"),
                                          ("-1/3", "gradient = (0)")])
def test_grad_of_identically_zero_function(capsys, tmp_path, at, expected):
    code, out = run(capsys, "grad", "--fn", CANCEL_FN, "--at", at, "--out", str(tmp_path))
    assert code == 0
    assert expected in out
    assert out.splitlines()[0] == f"f({at}) = 0"


def test_grad_reverse_mode_and_affine(capsys, tmp_path):
    code, out = run(capsys, "grad", "--fn", "affine", "--at", "1,2", "--mode", "reverse", "--out", str(tmp_path))
    assert code == 0
    assert "gradient = (2, -3)" in out
    assert "f(1, 2) = -3" in out


def test_stratify_writes_report(capsys, tmp_path):
    code, out = run(capsys, "stratify", "--fn", "relucancel", "--out", str(tmp_path))
    assert code == 0
    assert out.startswith("3 strata")
    data = json.loads((tmp_path / "strata.json").read_text())
    assert data["incidence"] == [[0, 1], [0, 2]]


def test_clarke_of_abs_at_origin(capsys, tmp_path):
    code, out = run(capsys, "clarke", "--fn", "abs1d", "--at", "0", "--out", str(tmp_path))
    assert code == 0
    assert "(-1)" in out and "(1)" in out
    assert "stationarity gap = 0" in out
    data = json.loads((tmp_path / "clarke.json").read_text())
    assert data["vertices"] == [["-1"], ["1"]]


def test_verify_refutes_zero_field(capsys, tmp_path):
    code, out = run(capsys, "verify", "--fn", "abs1d", "--field", "zero", "--suite", "chain",
                    "--curves", "5", "--out", str(tmp_path))
    assert code == 1
    assert "chain: FAIL" in out
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["verdict"] == "FAIL"
    assert (tmp_path / "verify_trials.csv").exists()


def test_verify_policy_family_passes(capsys, tmp_path):
    code, out = run(capsys, "verify", "--fn", "relucancel", "--field", "policy", "--suite", "all", "--seed", "7",
                    "--curves", "5", "--random-points", "10", "--out", str(tmp_path))
    assert code == 0
    for suite in ("chain", "inclusion", "regularity"):
        assert f"{suite}: PASS" in out


def test_verify_truncated_sum(capsys, tmp_path):
    code, out = run(capsys, "verify", "--fn", "cross2d", "--field", "clarke+normal", "--r", "2",
                    "--curves", "4", "--random-points", "10", "--out", str(tmp_path))
    assert code == 0
    assert "sum: PASS" in out
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["field"] == "clarke+truncated-normal(r=2)"
    assert report["settings"]["radius"] == "2"


def test_descend_writes_trajectory(capsys, tmp_path):
    code, out = run(capsys, "descend", "--fn", "l1-2d", "--from", "1,1", "--steps", "50", "--out", str(tmp_path))
    assert code == 0
    assert "steps = 50" in out
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "k,x0,x1,f,g_norm,gap"
    assert len(lines) == 52
    assert json.loads((tmp_path / "descent.json").read_text())["field"] == "clarke"


@pytest.mark.parametrize("argv", [
    ["grad", "--fn", "no-such-function", "--at", "0"],
    ["grad", "--fn", "relucancel", "--at", "1,2"],
    ["grad", "--fn", "relucancel", "--at", "zero"],
    ["grad", "--fn", "relucancel", "--at", "0", "--policy", "no-such-policy"],
    ["grad", "--fn", "relucancel"],
    ["verify", "--fn", "relucancel", "--suite", "sum"],
    ["verify", "--fn", "relucancel", "--selections", "0"],
    ["descend", "--fn", "relucancel", "--from", "0", "--alpha0", "x"],
    ["descend", "--fn", "relucancel", "--from", "0", "--alpha0", "0"],
    ["verify", "--fn", "relucancel", "--suite", "sum", "--r=-1"],
    ["verify", "--fn", "relucancel", "--curves", "0"],
    ["verify", "--fn", "relucancel", "--suite", "regularity", "--box", "0"],
    ["grad", "--fn", "relucancel", "--at", "1/0"],
    ["frobnicate"],
])
def test_bad_input_exits_with_two(capsys, tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "frobnicate" else argv) == 2


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "verify" in capsys.readouterr().out


@pytest.mark.parametrize("at, expected", [("0", "1"), ("1e-9", "0"), ("-1e-9", "0"), ("1", "0"), ("-1", "0"),
                                          ("1e3", "0"), ("-1e3", "0")])
def test_grad_of_named_cancelling_function(capsys, tmp_path, at, expected):
    code, out = run(capsys, "grad", "--fn", "paperf.fn", "--at", at, "--policy", "default", "--out", str(tmp_path))
    assert code == 0
    assert f"gradient = ({expected})" in out


def test_negative_points_in_two_dimensions(capsys, tmp_path):
    code, out = run(capsys, "grad", "--fn", "max2d", "--at", "-1,2", "--out", str(tmp_path))
    assert code == 0
    assert out.splitlines()[0] == "f(-1, 2) = 2"
    assert "gradient = (0, 1)" in out
    code, out = run(capsys, "descend", "--fn", "l1-2d", "--from", "-1,1", "--steps", "5", "--out", str(tmp_path))
    assert code == 0
    assert "steps = 5" in out


def test_attach_point_values():
    assert attach_point_values(["grad", "--at", "-1,2", "--fn", "f"]) == ["grad", "--at=-1,2", "--fn", "f"]
    assert attach_point_values(["descend", "--from", "-.5", "--seed", "3"]) == ["descend", "--from=-.5", "--seed", "3"]
    assert attach_point_values(["grad", "--at", "--fn", "f"]) == ["grad", "--at", "--fn", "f"]
    assert attach_point_values(["grad", "--seed", "-1"]) == ["grad", "--seed", "-1"]


def test_stratify_prints_tangential_gradients(capsys, tmp_path):
    code, out = run(capsys, "stratify", "--fn", "relucancel", "--out", str(tmp_path))
    assert code == 0
    assert "[0] dim 0 signs [0, 0] point (0) gradient (0) offset 0" in out
    assert "gradient (1)" not in out
