import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from foliation_lab.cli import main

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
SCHEMA = json.loads((ROOT / "docs" / "report_schema.json").read_text())


def run_cli(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    report = json.loads(out.out)
    jsonschema.validate(report, SCHEMA)
    return code, report, out.err


def test_reduce_cusp(capsys):
    code, report, _ = run_cli(capsys, "reduce", "--input", CORPUS / "cusp.txt")
    assert code == 0 and report["status"] == "ok"
    red = report["results"]["reduction"]
    assert red["n_blowups"] == 3
    assert sorted(c["self_intersection"] for c in red["divisor"]["components"]) == [-3, -2, -1]
    assert all(v["pass"] for v in report["verdicts"])


def test_holonomy_report(capsys):
    code, report, _ = run_cli(capsys, "holonomy", "--input", CORPUS / "linear_complex.txt", "--order", 6)
    assert code == 0
    assert report["job"]["order"] == 6
    assert report["results"]["holonomy"]


def test_sliding_report(capsys):
    code, report, _ = run_cli(capsys, "sliding", "--input", CORPUS / "homogeneous1.txt",
                              "--fibration", CORPUS / "fib_homog.txt", "--order", 8)
    assert code == 0
    assert report["results"]["sliding"]["entries"]


def test_compare_failing_verdict_exits_2(capsys, tmp_path):
    perturbed = tmp_path / "h1p.txt"
    perturbed.write_text("omega = (y^2 + (0.3,0.1) x y + 0.5 x^2 + 0.5 x^3) dx"
                         " + (x^2 - 1.7 x y + (0,0.2) y^2) dy\n")
    code, report, err = run_cli(capsys, "compare", "--input", CORPUS / "homogeneous1.txt",
                                "--input2", perturbed, "--fibration", CORPUS / "fib_homog.txt",
                                "--order", 8)
    assert code == 2 and report["status"] == "verdict-fail"
    assert "verdict failed" in err


def test_flows_check(capsys):
    code, report, _ = run_cli(capsys, "flows-check", "--seed", 5)
    assert code == 0 and report["job"]["seed"] == 5


def test_parse_error_exits_1(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("omega = y dx +\n  $ dy\n")
    code, report, err = run_cli(capsys, "reduce", "--input", bad)
    assert code == 1 and report["status"] == "error"
    assert report["error"]["stage"] == "parse input"
    assert "line 2, column 3" in report["error"]["message"]
    assert "verdicts" not in report


def test_non_isolated_exits_1(capsys, tmp_path):
    bad = tmp_path / "nonisolated.txt"
    bad.write_text("omega = x y dx + x^2 dy\n")
    code, report, _ = run_cli(capsys, "reduce", "--input", bad)
    assert code == 1 and report["error"]["stage"] == "reduction"
    assert "NonIsolatedSingularity" in report["error"]["message"]


def test_missing_argument_exits_1(capsys):
    code, report, _ = run_cli(capsys, "sliding", "--input", CORPUS / "cusp.txt")
    assert code == 1 and "fibration" in report["error"]["message"]


def test_bad_config_exits_1(capsys, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("jet_order = 1\n")
    code, report, _ = run_cli(capsys, "reduce", "--input", CORPUS / "cusp.txt", "--config", cfg)
    assert code == 1


def test_out_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["reduce", "--input", str(CORPUS / "radial.txt"), "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    report = json.loads(out.read_text())
    jsonschema.validate(report, SCHEMA)
    assert report["results"]["reduction"]["divisor"]["components"][0]["dicritical"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "foliation_lab", "reduce", "--input",
                           str(CORPUS / "cusp.txt")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["reduction"]["n_blowups"] == 3
