"""CLI tests: subcommand behavior, exit codes, and JSON report shape.

Exit codes: 0 clean (info findings allowed), 1 warnings, 2 errors,
3 unreadable/unparsable input or usage errors.  The shipped corpus has
documented codes: leeds-q2 1, ml-bindings 0, maxpos 0, loop-output 1,
getter-setter 0, generated-loop 1.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from exr.cli import main
from exr.specdsl import parse_spec

DATA = Path(__file__).resolve().parents[1] / "src" / "exr" / "data"
CORPUS = DATA / "corpus"

GEN_ARGS = ["gen", str(DATA / "loops.tpl"), "--rule", "loop_mcq",
            "--bind", "init=0", "--bind", "test=<=", "--bind", "limit=3",
            "--bind", "assign=+=", "--bind", "step=2", "--seed", "1"]


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, json.loads(out), err


class TestEval:
    def test_loop_effect(self, capsys):
        code, out, _ = run(capsys, "eval", str(CORPUS / "loop-output.ml"),
                           "--fuel", "100")
        assert code == 0
        assert "0 2 " in out
        assert "status: Completed" in out

    def test_json_payload_is_effect(self, capsys):
        code, report, _ = run_json(
            capsys, "eval", str(CORPUS / "loop-output.ml"))
        assert code == 0
        assert report["findings"] == []
        assert report["payload"]["stdout"] == "0 2 "
        assert report["payload"]["status"] == "Completed"
        assert set(report) == {"tool_version", "input", "findings", "payload"}

    def test_fuel_exhaustion_warns(self, capsys):
        code, report, _ = run_json(
            capsys, "eval", str(CORPUS / "loop-output.ml"), "--fuel", "2")
        assert code == 1
        assert report["findings"][0]["code"] == "Runtime"
        assert report["payload"]["status"] == "FuelExhausted"

    def test_missing_file(self, capsys):
        code, out, err = run(capsys, "eval", "/no/such/file.ml")
        assert code == 3 and out == "" and "cannot read" in err

    def test_unparsable_program(self, capsys, tmp_path):
        bad = tmp_path / "bad.ml"
        bad.write_text("int x = ;")
        code, out, err = run(capsys, "eval", str(bad))
        assert code == 3 and "error" in err


class TestCheck:
    @pytest.mark.parametrize("name,expected", [
        ("leeds-q2", 1),
        ("ml-bindings", 0),
        ("maxpos", 0),
        ("loop-output", 1),
        ("getter-setter", 0),
        ("generated-loop", 1),
    ])
    def test_corpus_exit_codes(self, capsys, name, expected):
        code, _, _ = run(capsys, "check", str(CORPUS / f"{name}.exr"))
        assert code == expected

    def test_leeds_report_shape(self, capsys):
        code, report, _ = run_json(
            capsys, "check", str(CORPUS / "leeds-q2.exr"))
        assert code == 1
        codes = [f["code"] for f in report["findings"]]
        assert codes == ["Discrepancy", "MissingPath"]
        flag = report["findings"][1]
        assert flag["pos"] == [30, 52]
        assert "at 30:2" in flag["message"]
        options = report["payload"]["validation"]["options"]
        assert options["b"]["status"] == "confirmed"
        assert {k: v["status"] for k, v in options.items() if k != "b"} == {
            "a": "refuted", "c": "refuted", "d": "refuted"}
        complexity = report["payload"]["complexity"]
        assert complexity["effort_min"] == complexity["effort_max"] == 16
        assert complexity["patterns"] == ["P2", "P3"]
        assert complexity["cell_max_path"] == ["Analyze", "Procedural"]

    def test_maxpos_is_info_only(self, capsys):
        code, report, _ = run_json(capsys, "check", str(CORPUS / "maxpos.exr"))
        assert code == 0
        severities = {f["severity"] for f in report["findings"]}
        assert severities == {"info"}
        assert report["payload"]["complexity"]["patterns"] == ["P2"]

    def test_generated_loop_flags_cheap_read(self, capsys):
        code, report, _ = run_json(
            capsys, "check", str(CORPUS / "generated-loop.exr"))
        assert code == 1
        flag = report["findings"][0]
        assert flag["code"] == "MissingPath"
        assert "read" in flag["message"] and "8.00x" in flag["message"]

    def test_unparsable_spec(self, capsys, tmp_path):
        bad = tmp_path / "bad.exr"
        bad.write_text('exercise "x" {\n')
        code, out, err = run(capsys, "check", str(bad))
        assert code == 3 and "error" in err

    def test_bad_verb_map_path(self, capsys):
        code, _, err = run(capsys, "check", str(CORPUS / "leeds-q2.exr"),
                           "--verb-map", "/no/such/verbs.txt")
        assert code == 3


class TestGen:
    def test_stdout_matches_shipped_corpus_file(self, capsys):
        code, out, _ = run(capsys, *GEN_ARGS)
        assert code == 0
        assert out == (CORPUS / "generated-loop.exr").read_text()

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "fresh.exr"
        code, out, _ = run(capsys, *GEN_ARGS, "-o", str(target))
        assert code == 0
        assert f"wrote {target}" in out
        spec = parse_spec(target.read_text())
        assert spec.id == "generated-loop"
        assert spec.provenance["bindings"]["seed"] == "1"

    def test_json_spec_payload_parses(self, capsys):
        code, report, _ = run_json(capsys, *GEN_ARGS)
        assert code == 0
        spec = parse_spec(report["payload"]["spec"])
        assert spec.correct_option.label == "0 2"

    def test_same_seed_same_text(self, capsys):
        _, first, _ = run(capsys, *GEN_ARGS)
        _, second, _ = run(capsys, *GEN_ARGS)
        assert first == second

    def test_unknown_rule(self, capsys):
        code, _, err = run(capsys, "gen", str(DATA / "loops.tpl"),
                           "--rule", "nosuch", "--bind", "init=0")
        assert code == 3

    def test_malformed_binding(self, capsys):
        code, _, err = run(capsys, "gen", str(DATA / "loops.tpl"),
                           "--rule", "loop_mcq", "--bind", "init")
        assert code == 3 and "K=V" in err


class TestClassify:
    def test_interpreter_compiler(self, capsys):
        code, out, _ = run(
            capsys, "classify", "distinguish an interpreter from a compiler")
        assert code == 0
        assert "cell: Analyze x Conceptual" in out
        assert "course level: WritingSmallFragments" in out

    def test_json_cell(self, capsys):
        code, report, _ = run_json(
            capsys, "classify", "trace a sort algorithm")
        assert code == 0
        assert report["payload"]["cell"] == {
            "process": "Apply", "knowledge": "Procedural"}
        assert report["payload"]["score"] == 5

    def test_unclassifiable(self, capsys):
        code, report, _ = run_json(
            capsys, "classify", "ponder the imponderable")
        assert code == 2
        assert report["findings"][0]["severity"] == "error"
        assert report["payload"]["cell"] is None


class TestDiagnose:
    def test_chain_answer(self, capsys):
        code, out, _ = run(
            capsys, "diagnose", "--pack", str(DATA / "diff.rules"),
            "--task", "d/dx[log(sin(x^3))]", "--answer", "1/sin(x^3)")
        assert code == 0
        assert "buggy_chain_inner -> d_log" in out

    def test_json_paths(self, capsys):
        code, report, _ = run_json(
            capsys, "diagnose", "--pack", str(DATA / "diff.rules"),
            "--task", "d/dx[log(sin(x^3))]", "--answer", "1/sin(x^3)")
        assert code == 0
        top = report["payload"]["paths"][0]
        assert top["rules"] == ["buggy_chain_inner", "d_log"]
        assert top["buggy"] == 1
        assert "inner_layer" in top["steps"][0]["tags"]

    def test_no_explanation(self, capsys):
        code, report, _ = run_json(
            capsys, "diagnose", "--pack", str(DATA / "diff.rules"),
            "--task", "d/dx[x]", "--answer", "42")
        assert code == 1
        assert report["findings"][0]["code"] == "NoExplanation"
        assert report["payload"]["paths"] == []

    def test_bad_term(self, capsys):
        code, _, err = run(
            capsys, "diagnose", "--pack", str(DATA / "diff.rules"),
            "--task", "d/dx[", "--answer", "1")
        assert code == 3

    def test_missing_pack(self, capsys):
        code, _, err = run(
            capsys, "diagnose", "--pack", "/no/pack.rules",
            "--task", "x", "--answer", "x")
        assert code == 3


class TestSimulate:
    def test_expert_on_leeds(self, capsys):
        code, report, _ = run_json(
            capsys, "simulate", str(CORPUS / "leeds-q2.exr"),
            "--profile", str(DATA / "profiles" / "expert.profile"),
            "--trials", "1000", "--seed", "4")
        assert code == 0
        outcome = report["payload"]["outcome"]
        assert outcome["trials"] == 1000
        assert outcome["misses"] == {"check_bounds": 304}
        assert outcome["solved"] == 696

    def test_repeat_runs_identical(self, capsys):
        argv = ("simulate", str(CORPUS / "leeds-q2.exr"),
                "--profile", str(DATA / "profiles" / "novice.profile"),
                "--trials", "50", "--seed", "9")
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        assert first == second

    def test_spec_without_plan(self, capsys, tmp_path):
        spec = tmp_path / "noplan.exr"
        spec.write_text('exercise "p" {\n  question {\nhi\n  }\n'
                        '  answer: 3\n}\n')
        code, report, _ = run_json(
            capsys, "simulate", str(spec),
            "--profile", str(DATA / "profiles" / "novice.profile"))
        assert code == 2
        assert report["findings"][0]["code"] == "MissingPlan"

    def test_bad_profile(self, capsys, tmp_path):
        bad = tmp_path / "bad.profile"
        bad.write_text("level: Wisdom\n")
        code, _, err = run(capsys, "simulate", str(CORPUS / "leeds-q2.exr"),
                           "--profile", str(bad))
        assert code == 3 and "unknown knowledge level" in err


class TestDispatch:
    def test_unknown_subcommand(self, capsys):
        code, out, err = run(capsys, "nosuchcmd")
        assert code == 3
        assert "usage:" in err and out == ""

    def test_no_arguments(self, capsys):
        code, _, err = run(capsys)
        assert code == 3 and "usage:" in err

    def test_help_exits_zero(self, capsys):
        code, out, _ = run(capsys, "--help")
        assert code == 0 and "subcommands" in out.lower() or "usage" in out

    def test_trials_must_be_positive(self, capsys):
        code, _, err = run(capsys, "simulate", str(CORPUS / "leeds-q2.exr"),
                           "--profile",
                           str(DATA / "profiles" / "novice.profile"),
                           "--trials", "0")
        assert code == 3

    def test_module_is_runnable(self):
        proc = subprocess.run(
            [sys.executable, "-m", "exr.cli", "eval",
             str(CORPUS / "loop-output.ml")],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "0 2 " in proc.stdout
