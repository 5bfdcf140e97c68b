import json
import subprocess
import sys

import pytest

import currentlab.currents as cu
from currentlab.cli import main


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_enumerate_genus2_L1(capsys):
    code, out, _ = run(capsys, "enumerate", "--genus", "2", "-L", "1")
    doc = json.loads(out)
    assert code == 0 and doc["result"]["count"] == 4
    assert doc["config"]["L"] == "1" and doc["config"]["genus"] == "2"


def test_enumerate_csv(capsys):
    code, out, _ = run(capsys, "enumerate", "-L", "1", "--format", "csv")
    rows = [r for r in out.splitlines() if not r.startswith("#")]
    assert code == 0 and rows == ["class,length", "a1,1", "b1,1", "a2,1", "b2,1"]


def test_dist_report(capsys):
    code, out, _ = run(capsys, "dist", "-L", "6")
    r = json.loads(out)["result"]
    assert code == 0 and r["L"] == 6
    assert r["value"] > 0 and r["argmaxClass"]
    assert 0 < r["entropyX"] and 0 < r["entropyY"]


def test_byte_identical(capsys, tmp_path):
    args = ["manhattan", "-L", "4", "--points", "3", "--format", "csv"]
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b
    out = tmp_path / "r.json"
    assert main(["entropy", "-L", "4", "--out", str(out)]) == 0
    first = out.read_bytes()
    assert main(["entropy", "-L", "4", "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# test\nL = 4\nx = L(bolza+twist(0.5))\n")
    _, out, _ = run(capsys, "entropy", "--config", str(cfg))
    doc = json.loads(out)
    assert doc["config"]["L"] == "4" and doc["config"]["x"] == "L(bolza+twist(0.5))"
    _, out, _ = run(capsys, "entropy", "--config", str(cfg), "-L", "3")
    assert json.loads(out)["result"]["L"] == 3
    cfg.write_text("bogus = 1\n")
    assert run(capsys, "entropy", "--config", str(cfg))[0] == 2


@pytest.mark.parametrize("args", [
    ["entropy", "--genus", "1"],
    ["dist", "-L", "4", "--x", "a1"],           # non-filling
    ["entropy", "--x", "L(nosuch)"],
    ["intersect", "--x", "a1", "--y", "a1A1"],  # trivial word
    ["anosov-dist", "-L", "4", "--phi=-1,0,1"],
    ["entropy", "--format", "xml"],
    ["entropy", "-L", "zero"],
    ["nosuch-command"],
])
def test_exit_validation(capsys, args):
    code, _, err = run(capsys, *args)
    assert code == 2 and "error" in err


def test_exit_budget(capsys):
    code, _, err = run(capsys, "enumerate", "-L", "5", "--budget-classes", "10")
    assert code == 3 and "budget" in err


def test_exit_unstable(capsys, monkeypatch):
    monkeypatch.setattr(cu, "MAX_RADIUS", 2)
    monkeypatch.setattr(cu.IntersectionEngine, "linking_counts", lambda self, c1, c2, R: list(range(R + 1)))
    cu._ENGINES.clear()
    try:
        code, _, err = run(capsys, "intersect", "--x", "a1", "--y", "b1", "--radius", "1")
    finally:
        cu._ENGINES.clear()
    assert code == 4 and "unstable" in err


def test_console_entry():
    p = subprocess.run([sys.executable, "-m", "currentlab.cli", "enumerate", "-L", "1"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and json.loads(p.stdout)["result"]["classes"] == ["a1", "b1", "a2", "b2"]
