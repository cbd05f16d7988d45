import io
import json
import subprocess
import sys

import pytest

from vssdimsim.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_run_table():
    code, text = run("run", "--problem", "linear", "--order", "2", "--steps", "1000")
    assert code == 0
    fields = dict(line.split(None, 1) for line in text.splitlines() if not line.startswith(("f ", "g ")))
    assert float(fields["ge"]) == pytest.approx(3.53e-4, rel=0.1)
    assert "f evals  1998" in text


def test_run_json_and_uniform():
    code, text = run("run", "--problem", "bruss", "--order", "3", "--steps", "500", "--uniform",
                     "--json")
    info = json.loads(text)
    assert code == 0 and info["x_N"] == 20.0 and info["n_f_evals"] == 3 * 498
    assert len(info["y_N"]) == 2


def test_run_pde_grid():
    code, text = run("run", "--problem", "bruss-pde", "--pde-grid", "5", "--order", "2",
                     "--steps", "2000", "--json", "--backend", "python")
    assert code == 0 and len(json.loads(text)["y_N"]) == 10


def test_converge_csv_is_deterministic():
    args = ("converge", "--problem", "linear", "--order", "2", "--steps", "1000,2000")
    a, b = run(*args), run(*args)
    assert a == b
    lines = a[1].splitlines()
    assert lines[0] == "N,ge,O_N" and lines[1].startswith("1000,3.5")


def test_converge_table_and_json():
    code, md = run("converge", "--order", "1,2", "--steps", "1000,2000", "--table")
    assert code == 0 and md.startswith("| method |")
    code, js = run("converge", "--order", "2", "--steps", "1000,2000", "--json")
    assert json.loads(js)[1]["order_estimate"] == pytest.approx(2.0, abs=0.05)


def test_verify_exit_codes(monkeypatch):
    code, text = run("verify", "--samples", "20")
    assert code == 0 and "| 4 |" in text
    import vssdimsim.harness as harness
    monkeypatch.setattr(harness, "TIER_TOL", {1: -1.0, 2: -1.0, 3: -1.0, 4: -1.0})
    code, _ = run("verify", "--samples", "2", "--orders", "2")
    assert code == 1


def test_coeffs():
    code, text = run("coeffs", "--order", "2", "--sigma", "2")
    assert code == 0 and "1.1" in text
    code, text = run("coeffs", "--order", "3", "--sigma", "1,1", "--json")
    d = json.loads(text)
    assert d["A"][1][0] == pytest.approx(51 / 80)
    code, text = run("coeffs", "--order", "4")
    assert code == 0 and "v^T phi" in text


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["run", "--order", "7"],
    ["run", "--problem", "nope"],
    ["run", "--steps", "1", "--order", "3"],
    ["run", "--base", "-2"],
    ["converge", "--steps", "2000,1000"],
    ["converge", "--order", "1,9"],
    ["converge", "--steps", "x"],
    ["verify", "--samples", "0"],
    ["coeffs", "--order", "3", "--sigma", "1"],
    ["coeffs", "--order", "2", "--sigma", "-1"],
    [],
])
def test_usage_errors(argv):
    assert run(*argv)[0] == 2


def test_help_exits_zero():
    assert run("--help")[0] == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "vssdimsim", "coeffs", "--order", "1", "--json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["Bbar"] == [[0.499]]
    proc = subprocess.run([sys.executable, "-m", "vssdimsim", "run", "--order", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
