from __future__ import annotations

import csv
import json
import subprocess
import sys
from importlib import resources

import pytest

from pmdp_gp.cli import main

DATA = resources.files("pmdp_gp") / "data"
KY = str(DATA / "knuth_yao.model")
FAIR = str(DATA / "knuth_yao_fair.model")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_feasible_json_is_pure(capsys):
    code, out, _ = run(capsys, "feasible", "--model", KY, "--specs", DATA / "ky_feasible.specs", "--json")
    assert code == 0
    data = json.loads(out)
    assert data["status"] == "feasible" and data["exit_code"] == 0
    assert set(data["valuation"]) == {"p", "q"}
    assert data["specs"][0]["achieved"] <= 0.3


def test_human_output_ends_with_json(capsys):
    code, out, _ = run(capsys, "feasible", "--model", KY, "--specs", DATA / "ky_feasible.specs")
    assert code == 0
    assert out.startswith("feasible: feasible")
    assert json.loads(out.strip().splitlines()[-1])["status"] == "feasible"


def test_infeasible_exit_code(capsys, tmp_path):
    specs = write(tmp_path, "zero.specs", "reach <= 0 label die2\n")
    code, out, _ = run(capsys, "feasible", "--model", KY, "--specs", specs, "--json")
    assert code == 1 and json.loads(out)["status"] == "infeasible"


def test_numerical_exit_code(capsys):
    code, out, _ = run(capsys, "feasible", "--model", KY, "--specs", DATA / "ky_feasible.specs", "--max-iter", "1",
                       "--json")
    assert code == 3 and json.loads(out)["exit_code"] == 3


def test_optimize_with_trace(capsys, tmp_path):
    trace = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "optimize", "--model", KY, "--specs", DATA / "ky_optimize.specs", "--json",
                       "--trace", trace)
    assert code == 0
    data = json.loads(out)
    assert data["status"] == "optimal" and 0.2 < data["objective"] <= 1.0
    rows = list(csv.DictReader(open(trace)))
    assert len(rows) == data["scp"]["solves"]


def test_repair(capsys):
    code, out, _ = run(capsys, "repair", "--model", FAIR, "--specs", DATA / "ky_repair.specs",
                       "--changeable", DATA / "ky_changeable.txt", "--json")
    data = json.loads(out)
    assert code == 0 and data["specs"][0]["achieved"] <= 0.125
    assert data["repair_cost"] > 0


def test_repair_zero_bound(capsys):
    code, _, _ = run(capsys, "repair", "--model", FAIR, "--specs", DATA / "ky_repair.specs",
                     "--changeable", DATA / "ky_changeable.txt", "--cost-bound", "0", "--json")
    assert code == 1


def test_region_boxes(capsys):
    code, out, _ = run(capsys, "region", "--model", KY, "--specs", DATA / "ky_region.specs",
                       "--region", DATA / "ky_regions.txt", "--json")
    assert code == 1
    assert [d["status"] for d in json.loads(out)] == ["UNSAFE", "UNSAFE", "UNKNOWN"]


def test_region_only_unknown_exits_zero(capsys, tmp_path):
    region = write(tmp_path, "r.txt", "p 0.9 0.99\nq 0.9 0.99\n")
    code, out, _ = run(capsys, "region", "--model", KY, "--specs", DATA / "ky_region.specs", "--region", region,
                       "--json")
    assert code == 0 and json.loads(out)["status"] == "UNKNOWN"


@pytest.mark.parametrize("argv", [
    ["feasible", "--specs", "x"],
    ["launch", "--model", KY, "--specs", "x"],
    ["feasible", "--model", "/nonexistent", "--specs", "x"],
    ["optimize", "--model", KY, "--specs", str(DATA / "ky_feasible.specs")],
    ["repair", "--model", FAIR, "--specs", str(DATA / "ky_repair.specs")],
    ["region", "--model", KY, "--specs", str(DATA / "ky_feasible.specs")],
])
def test_usage_errors(argv, capsys):
    code, out, _ = run(capsys, *argv)
    assert code == 2 and out == ""


def test_format_error_names_line(capsys, tmp_path):
    specs = write(tmp_path, "bad.specs", "reach <= 0.3 label die2\nreach <= 7 label die2\n")
    code, _, err = run(capsys, "feasible", "--model", KY, "--specs", specs)
    assert code == 2 and "line 2" in err


def test_installed_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pmdp_gp.cli", "feasible", "--model", KY,
                           "--specs", str(DATA / "ky_feasible.specs"), "--json"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "feasible"
