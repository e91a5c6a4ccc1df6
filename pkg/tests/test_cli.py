import csv
import io
import subprocess
import sys

import pytest

from qploc.cli import TABLE_COLUMNS, main
from qploc.fileio import load_instance, save_instance
from qploc.instance import Solution, apply_variant, evaluate

from conftest import make_instance


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_solution(text):
    lines = dict(line.split(": ", 1) for line in text.splitlines() if line.startswith(("open:", "assign:")))
    return Solution([int(v) for v in lines["assign"].split()])


def test_gen_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert run(capsys, "gen", "-n", "250", "--seed", "1", "-o", str(a))[0] == 0
    assert run(capsys, "gen", "-n", "250", "--seed", "1", "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert load_instance(a).n == 250


@pytest.mark.parametrize("variant", ["uhlpsa", "uphmpsa", "chlpsa", "cphmpsa"])
def test_solve_reports_its_own_solution(tmp_path, capsys, variant):
    inst = make_instance(6, 3, "chlpsa", p=6)
    path = tmp_path / "inst.txt"
    save_instance(inst, path)
    csv_path = tmp_path / "out.csv"
    code, out, _ = run(capsys, "solve", str(path), "--variant", variant, "--p", "2", "--csv", str(csv_path))
    assert code == 0
    assert out.split()[:len(TABLE_COLUMNS) + 1][:2] == ["Instance", "Opt."]
    sol = parse_solution(out)
    configured = apply_variant(inst, variant, 2)
    value = evaluate(configured, sol).total
    rows = list(csv.DictReader(open(csv_path)))
    assert float(rows[0]["Opt."]) == pytest.approx(value, abs=1e-6)
    assert rows[0]["status"] == "optimal"


def test_env_override(tmp_path, capsys, monkeypatch):
    inst = make_instance(6, 4, "cphmpsa", p=6)
    path = tmp_path / "inst.txt"
    save_instance(inst, path)
    monkeypatch.setenv("QPLOC_P", "1")
    code, out, _ = run(capsys, "solve", str(path), "--variant", "uphmpsa")
    assert code == 0
    assert len(parse_solution(out).open) == 1
    code, out, _ = run(capsys, "solve", str(path), "--variant", "uphmpsa", "--p", "3")
    assert len(parse_solution(out).open) <= 3


def test_rlt_bound_column_is_ordered(capsys):
    code, out, _ = run(capsys, "rlt-bound", "-n", "6", "--seed", "2", "--variant", "cphmpsa", "--p", "2")
    assert code == 0
    rows = {r["config"]: float(r["bound"]) for r in csv.DictReader(io.StringIO(out))}
    assert list(rows) == ["STD", "RL2", "RL3", "RL4", "RL5", "RL6", "RL7", "RL8", "RL1"]
    tol = 1e-7 * abs(rows["RL1"])
    for cfg in ("RL3", "RL4", "RL5", "RL6", "RL7", "RL8"):
        assert rows["RL2"] <= rows[cfg] + tol <= rows["RL1"] + 2 * tol
    assert rows["STD"] <= rows["RL2"] + tol


def test_selftest_exit_code(capsys):
    code, out, _ = run(capsys, "selftest", "--count", "6")
    assert code == 0
    assert "6/6 oracle checks passed" in out


def test_missing_file_is_an_error(capsys):
    code, _, err = run(capsys, "solve", "/nonexistent/instance.txt")
    assert code == 1 and "error" in err


def test_module_entry_point(tmp_path):
    inst = make_instance(5, 5, "cphmpsa", p=2)
    path = tmp_path / "i.txt"
    save_instance(inst, path)
    proc = subprocess.run([sys.executable, "-m", "qploc", "solve", str(path), "--p", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert "status: optimal" in proc.stdout
