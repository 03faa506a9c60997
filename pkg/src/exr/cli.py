"""Command-line front end for the exercise toolkit.

Subcommands map onto the library layers: `eval` runs a program,
`check` validates and complexity-types an exercise spec, `gen` expands
a template pack into a new spec, `classify` types a learning
objective, `diagnose` explains a wrong answer against a rule pack, and
`simulate` walks a plan with a student profile.

Every command prints one report: findings plus a command-specific
payload, as text or as a single JSON document with `--json`.  The exit
code reflects the worst finding severity: 0 clean (info allowed),
1 warnings, 2 errors, 3 unreadable or unparsable input and usage
errors.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from importlib import metadata
from pathlib import Path

from .bloom import CannotNormalize, ClueTable, Unclassifiable, classify_statement, course_level
from .findings import Finding, max_severity, sort_findings
from .minilang import ParseError, evaluate, parse_program
from .plans import (
    PlanError,
    atom_score,
    consistency_check,
    load_verb_map,
    load_weights,
    type_plan,
)
from .rewrite import (
    NoExplanation,
    RuleError,
    RulePack,
    TermError,
    diagnose,
    format_term,
    parse_term,
)
from .sim import load_profile, simulate
from .specdsl import SpecError, parse_spec, validate_spec
from .templates import TemplateError, TemplatePack, instantiate_exercise

_DATA = Path(__file__).resolve().parent / "data"
_INT_RE = re.compile(r"-?\d+")


def _version() -> str:
    try:
        return metadata.version("exr")
    except metadata.PackageNotFoundError:
        return "0+unknown"


class _Failure(Exception):
    """Input could not be read or parsed; maps to exit code 3."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(3)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true",
                        help="emit one JSON report document")
    common.add_argument("--fuel", type=_positive_int, default=10_000,
                        help="evaluation step budget (default 10000)")
    common.add_argument("--clues", metavar="FILE",
                        default=str(_DATA / "clues.txt"),
                        help="clue table for classification")
    common.add_argument("--verb-map", metavar="FILE",
                        default=str(_DATA / "verbs.txt"),
                        help="plan verb-to-cell map")
    common.add_argument("--weights", metavar="FILE",
                        default=str(_DATA / "weights.txt"),
                        help="plan typing weights")

    parser = _Parser(prog="exr", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("eval", parents=[common],
                       help="run a program file and report its effect")
    p.add_argument("file")

    p = sub.add_parser("check", parents=[common],
                       help="validate and complexity-type an exercise spec")
    p.add_argument("file")

    p = sub.add_parser("gen", parents=[common],
                       help="instantiate an exercise from a template pack")
    p.add_argument("pack")
    p.add_argument("--rule", required=True, help="spec rule to instantiate")
    p.add_argument("--bind", action="append", default=[], metavar="K=V",
                   help="template binding; integers are auto-coerced")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", metavar="FILE",
                   help="write the generated exercise here instead of stdout")

    p = sub.add_parser("classify", parents=[common],
                       help="type a learning-objective statement")
    p.add_argument("statement")

    p = sub.add_parser("diagnose", parents=[common],
                       help="explain an answer for a task via a rule pack")
    p.add_argument("--pack", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--answer", required=True)
    p.add_argument("--max-steps", type=_positive_int, default=6)

    p = sub.add_parser("simulate", parents=[common],
                       help="walk an exercise plan with a student profile")
    p.add_argument("file")
    p.add_argument("--profile", required=True)
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _Failure(f"cannot read {path}: {exc}") from exc


_SIBLING_POS_RE = re.compile(r"\bat (\d+):(\d+)\b")


def _offset_plan_finding(f: Finding, delta: int) -> Finding:
    """Shift a finding from plan-relative lines to file lines.  Lint
    messages name the sibling's position too, so shift that as well."""
    if delta <= 0:
        return f
    message = _SIBLING_POS_RE.sub(
        lambda m: f"at {int(m.group(1)) + delta}:{m.group(2)}", f.message)
    pos = (f.pos[0] + delta, f.pos[1]) if f.pos else None
    return Finding(f.severity, f.code, message, pos)


# --- subcommands ----------------------------------------------------------

def cmd_eval(args) -> tuple[str, list[Finding], object, list[str]]:
    text = _read_text(args.file)
    try:
        program = parse_program(text)
    except ParseError as exc:
        raise _Failure(f"{args.file}: {exc}") from exc
    effect = evaluate(program, fuel=args.fuel)
    findings = []
    if not effect.ok:
        findings.append(Finding("warning", "Runtime",
                                f"program did not complete: {effect.status}"))
    lines = [f"status: {effect.status}",
             f"steps: {effect.steps}",
             f"stdout: {effect.stdout}"]
    for name, value in effect.bindings.items():
        lines.append(f"binding {name} = "
                     f"{list(value) if isinstance(value, tuple) else value}")
    return args.file, findings, effect.to_json(), lines


def cmd_check(args) -> tuple[str, list[Finding], object, list[str]]:
    text = _read_text(args.file)
    try:
        spec = parse_spec(text)
    except SpecError as exc:
        raise _Failure(f"{args.file}: {exc}") from exc
    try:
        verb_cells = load_verb_map(args.verb_map)
        weights = load_weights(args.weights)
    except (OSError, ValueError) as exc:
        raise _Failure(str(exc)) from exc
    report = validate_spec(spec, fuel=args.fuel)
    findings = list(report.findings)
    declared = spec.declared_target if spec.target_declared else None
    delta = spec.plan_line - 1
    findings.extend(_offset_plan_finding(f, delta) for f in
                    consistency_check(declared, spec.plan, verb_cells, weights))
    complexity = None
    if spec.plan is not None:
        complexity = type_plan(spec.plan, verb_cells, weights)
    payload = {"validation": report.to_json(),
               "complexity": complexity.to_json() if complexity else None}
    lines = [f"exercise: {spec.id}"]
    for key, outcome in report.options.items():
        lines.append(f"option {key}: {outcome.status}")
    if complexity is not None:
        lo, hi = complexity.cell_min_path, complexity.cell_max_path
        lines.append(f"effort: {complexity.effort_min:g}"
                     f"..{complexity.effort_max:g}")
        lines.append(f"cells: {lo.process.name} x {lo.knowledge.name}"
                     f" .. {hi.process.name} x {hi.knowledge.name}")
        lines.append("patterns: "
                     + (", ".join(complexity.patterns) or "none"))
    return args.file, findings, payload, lines


def cmd_gen(args) -> tuple[str, list[Finding], object, list[str]]:
    try:
        pack = TemplatePack.from_file(args.pack)
    except OSError as exc:
        raise _Failure(f"cannot read {args.pack}: {exc}") from exc
    except TemplateError as exc:
        raise _Failure(str(exc)) from exc
    bindings: dict[str, object] = {}
    for pair in args.bind:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise _Failure(f"--bind expects K=V, got {pair!r}")
        bindings[key] = int(value) if _INT_RE.fullmatch(value) else value
    try:
        spec_text = instantiate_exercise(pack, args.rule, bindings,
                                         seed=args.seed, fuel=args.fuel)
    except TemplateError as exc:
        raise _Failure(str(exc)) from exc
    payload = {"rule": args.rule, "seed": args.seed, "spec": spec_text,
               "out": args.out}
    if args.out:
        try:
            Path(args.out).write_text(spec_text)
        except OSError as exc:
            raise _Failure(f"cannot write {args.out}: {exc}") from exc
        lines = [f"wrote {args.out}"]
    else:
        lines = [spec_text.rstrip("\n")]
    return args.pack, [], payload, lines


def cmd_classify(args) -> tuple[str, list[Finding], object, list[str]]:
    try:
        clues = ClueTable.from_file(args.clues)
    except (OSError, ValueError) as exc:
        raise _Failure(str(exc)) from exc
    try:
        cell = classify_statement(args.statement, clues)
    except (Unclassifiable, CannotNormalize) as exc:
        findings = [Finding("error", type(exc).__name__, str(exc))]
        return args.statement, findings, {"cell": None}, []
    payload = {"cell": {"process": cell.process.name,
                        "knowledge": cell.knowledge.name},
               "course_level": course_level(cell).name,
               "score": atom_score(cell)}
    lines = [f"cell: {cell.process.name} x {cell.knowledge.name}",
             f"course level: {course_level(cell).name}",
             f"score: {atom_score(cell)}"]
    return args.statement, [], payload, lines


def cmd_diagnose(args) -> tuple[str, list[Finding], object, list[str]]:
    try:
        pack = RulePack.from_file(args.pack)
    except OSError as exc:
        raise _Failure(f"cannot read {args.pack}: {exc}") from exc
    except RuleError as exc:
        raise _Failure(str(exc)) from exc
    try:
        task = parse_term(args.task)
        answer = parse_term(args.answer)
    except TermError as exc:
        raise _Failure(str(exc)) from exc
    findings: list[Finding] = []
    try:
        paths = diagnose(task, answer, pack, max_steps=args.max_steps)
    except NoExplanation:
        findings.append(Finding(
            "warning", "NoExplanation",
            f"no rule path of <= {args.max_steps} steps reaches the answer"))
        paths = []
    payload = {"paths": [
        {"rules": list(p.rule_names),
         "buggy": p.buggy_count,
         "steps": [{"rule": s.rule, "kind": s.kind, "tags": sorted(s.tags),
                    "term": format_term(s.term_after)} for s in p.steps]}
        for p in paths]}
    lines = []
    for p in paths:
        arrow = " -> ".join(p.rule_names) or "(answer equals the task)"
        lines.append(f"{arrow}  [{p.buggy_count} buggy]")
    return args.task, findings, payload, lines


def cmd_simulate(args) -> tuple[str, list[Finding], object, list[str]]:
    text = _read_text(args.file)
    try:
        spec = parse_spec(text)
    except SpecError as exc:
        raise _Failure(f"{args.file}: {exc}") from exc
    try:
        profile = load_profile(args.profile)
    except OSError as exc:
        raise _Failure(f"cannot read {args.profile}: {exc}") from exc
    except ValueError as exc:
        raise _Failure(f"{args.profile}: {exc}") from exc
    try:
        verb_cells = load_verb_map(args.verb_map)
        weights = load_weights(args.weights)
    except (OSError, ValueError) as exc:
        raise _Failure(str(exc)) from exc
    if spec.plan is None:
        findings = [Finding("error", "MissingPlan",
                            "exercise has no plan to simulate")]
        return args.file, findings, {"outcome": None}, []
    try:
        outcome = simulate(spec.plan, profile, verb_cells, weights,
                           seed=args.seed, trials=args.trials)
    except PlanError as exc:
        findings = [Finding("error", "PathExplosion", str(exc))]
        return args.file, findings, {"outcome": None}, []
    lines = [f"profile: {profile.label}",
             f"trials: {outcome.trials}",
             f"solved: {outcome.solved}"]
    misses = ", ".join(f"{k}={v}" for k, v in sorted(outcome.misses.items()))
    lines.append(f"misses: {misses or 'none'}")
    for site, counts in sorted(outcome.branch_counts.items()):
        shares = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        lines.append(f"choice {site}: {shares}")
    return args.file, [], {"outcome": outcome.to_json()}, lines


_COMMANDS = {
    "eval": cmd_eval,
    "check": cmd_check,
    "gen": cmd_gen,
    "classify": cmd_classify,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
}


def _exit_code(findings: list[Finding]) -> int:
    return {"error": 2, "warning": 1}.get(max_severity(findings), 0)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 3
    try:
        label, findings, payload, lines = _COMMANDS[args.command](args)
    except _Failure as exc:
        print(f"exr: error: {exc}", file=sys.stderr)
        return 3
    findings = sort_findings(findings)
    return _emit(args, label, findings, payload, lines)


def _emit(args, label, findings, payload, lines) -> int:
    if args.json:
        report = {
            "tool_version": _version(),
            "input": label,
            "findings": [f.to_json() for f in findings],
            "payload": payload,
        }
        print(json.dumps(report, indent=2))
    else:
        for f in findings:
            where = f" @{f.pos[0]}:{f.pos[1]}" if f.pos else ""
            print(f"{f.severity}: {f.code}{where}: {f.message}")
        for line in lines:
            print(line)
    return _exit_code(findings)


if __name__ == "__main__":
    sys.exit(main())
