"""Command-line interface: solve, bench, export, record round-trips."""

import io
import math
import re
from contextlib import redirect_stdout

import pytest

from eldp.cli import _parse_angle, main
from eldp.model import bundled_problem, total_cost


def run_cli(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(list(argv))
    return code, buf.getvalue()


def parse_records(text):
    rec = {"p": {}}
    for line in text.splitlines():
        parts = line.split()
        if parts[0] == "p":
            rec["p"][int(parts[1])] = float(parts[2])
        else:
            rec[parts[0]] = " ".join(parts[1:])
    return rec


class TestAngles:
    def test_pi_literals(self):
        assert _parse_angle("0.35pi") == pytest.approx(0.35 * math.pi)
        assert _parse_angle("0.47 * pi") == pytest.approx(0.47 * math.pi)
        assert _parse_angle("1.1") == 1.1


class TestSolve:
    def test_simple_case1_records(self):
        code, out = run_cli("solve", "case1", "--method", "simple",
                            "--format", "records")
        assert code == 0
        rec = parse_records(out)
        assert rec["status"] == "certified"
        assert float(rec["total_cost"]) == pytest.approx(8234.07, abs=0.01)
        assert len(rec["p"]) == 3

    def test_record_roundtrip_reproduces_the_cost(self):
        code, out = run_cli("solve", "case1", "--format", "records")
        assert code == 0
        rec = parse_records(out)
        prob = bundled_problem("case1")
        p = [rec["p"][i] for i in range(1, prob.n + 1)]
        assert total_cost(prob, p) == pytest.approx(
            float(rec["total_cost"]), abs=0.01)

    def test_human_output(self):
        code, out = run_cli("solve", "case1")
        assert code == 0
        assert "total cost" in out
        assert "8234.07" in out
        assert "certified" in out

    def test_adaptive_with_trace(self, tmp_path):
        trace = tmp_path / "trace.txt"
        code, out = run_cli("solve", "case1", "--method", "adaptive",
                            "--epsilon", "1e-3", "--format", "records",
                            "--trace-out", str(trace))
        assert code == 0
        rec = parse_records(out)
        assert float(rec["total_cost"]) == pytest.approx(8234.07, abs=0.01)
        assert "delta" in rec and "iterations" in rec
        assert trace.read_text().startswith("iter")

    def test_dataset_from_path(self, tmp_path):
        src = tmp_path / "tiny.txt"
        src.write_text("demand 30\n0.01 5 20 10 0.2 10 40\n")
        code, out = run_cli("solve", str(src), "--format", "records")
        assert code == 0
        assert parse_records(out)["p"][1] == pytest.approx(30.0)

    def test_flag_validation(self, capsys):
        code, _ = run_cli("solve", "case1", "--method", "simple",
                          "--theta1", "0.3")
        assert code == 1
        code, _ = run_cli("solve", "case1", "--method", "tangent",
                          "--epsilon", "1e-3")
        assert code == 1

    def test_unknown_dataset_fails_cleanly(self):
        code, _ = run_cli("solve", "nosuchcase")
        assert code == 1

    def test_uncertified_exit_status(self):
        code, out = run_cli("solve", "case2a", "--node-cap", "25",
                            "--format", "records")
        assert code == 1
        assert parse_records(out)["status"] == "uncertified"

    def test_byte_identical_records(self):
        _, out1 = run_cli("solve", "case1", "--format", "records")
        _, out2 = run_cli("solve", "case1", "--format", "records")
        assert out1 == out2


class TestBench:
    def test_case1_row(self):
        code, out = run_cli("bench", "--cases", "case1")
        assert code == 0
        row = [l for l in out.splitlines() if l.startswith("case1")][0]
        assert "ok" in row
        assert "8234.07" in row

    def test_case2b_simple_deviation(self):
        code, out = run_cli("bench", "--cases", "case2b",
                            "--methods", "simple")
        assert code == 0
        row = [l for l in out.splitlines() if l.startswith("case2b")][0]
        assert "+0.74" in row


class TestExport:
    def test_simple_export(self, tmp_path):
        out_path = tmp_path / "case1.lp"
        code, _ = run_cli("export", "case1", "--out", str(out_path))
        assert code == 0
        text = out_path.read_text()
        assert "Generals" in text and "Binaries" not in text

    def test_tangent_export(self, tmp_path):
        out_path = tmp_path / "case1t.lp"
        code, _ = run_cli("export", "case1", "--method", "tangent",
                          "--theta1", "0.35pi", "--theta2", "0.47pi",
                          "--out", str(out_path))
        assert code == 0
        text = out_path.read_text()
        assert len(re.findall(r"\beta\d+_\d+\b", text)) > 0
