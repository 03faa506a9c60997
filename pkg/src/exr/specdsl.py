"""Exercise spec format: parse, render, and machine-check `.exr` files.

A spec couples a question (prose plus fenced code blocks), either a set
of MCQ options or a free answer, a declared target cell, and a solution
plan.  Fenced code blocks must parse in the mini-language; option and
answer expectations (`expect stdout = "..."`, `expect name = <int>`) are
checked by actually evaluating the first fenced block.

Grammar sketch::

    exercise "<id>" {
      target: <Process> x <Knowledge>
      requires: <id>, <id>           # optional prerequisites
      from: <template> <k>=<v> ...   # optional generation provenance
      question { <text, ``` fences contain code> }
      mcq {
        <key>: "<label>" ["*"] ["expect" <facet>] ["via" <tag>]
        ...
      }
      answer: <int> | "<text>" | <name> = <int> | stdout = "<str>"
      plan { <plan expression> }
    }

Exactly one of `mcq`/`answer` is required; `*` marks the correct option.
Braces inside fenced blocks and quoted strings do not count toward block
nesting, so code and labels may contain them freely.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .bloom import BloomCell, KnowledgeCategory, ProcessCategory
from .findings import Finding, sort_findings
from .minilang import Effect, ParseError, Program, evaluate, parse_program
from .plans import Plan, PlanError, parse_plan, render_plan_full

Pos = tuple[int, int]


class SpecError(Exception):
    def __init__(self, message: str, pos: Pos = (0, 0)):
        self.message = message
        self.pos = pos
        super().__init__(f"{pos[0]}:{pos[1]}: {message}")


class DuplicateOptionKey(SpecError):
    pass


class MissingCorrectOption(SpecError):
    pass


class DuplicateCorrectOption(SpecError):
    pass


class Mode(Enum):
    MCQ = "mcq"
    FREE = "free"


@dataclass(frozen=True)
class Expectation:
    """A machine-checkable facet of the subject program's effect."""
    facet: str  # "stdout" | "binding"
    name: str | None
    value: int | str

    def describe(self) -> str:
        if self.facet == "stdout":
            return f'stdout = "{self.value}"'
        return f"{self.name} = {self.value}"


@dataclass(frozen=True)
class McqOption:
    key: str
    label: str
    correct: bool = False
    expect: Expectation | None = None
    via: str | None = None


@dataclass(frozen=True)
class ExerciseSpec:
    id: str
    declared_target: BloomCell
    target_declared: bool
    requires: tuple[str, ...]
    provenance: dict | None
    question: str
    options: tuple[McqOption, ...]
    answer: Expectation | int | str | None
    plan: Plan | None
    code_sources: tuple[str, ...] = field(compare=False, default=())
    programs: tuple[Program, ...] = field(compare=False, default=())
    plan_line: int = field(compare=False, default=0)

    @property
    def mode(self) -> Mode:
        return Mode.MCQ if self.options else Mode.FREE

    @property
    def correct_option(self) -> McqOption | None:
        for opt in self.options:
            if opt.correct:
                return opt
        return None


DEFAULT_TARGET = BloomCell(ProcessCategory.Understand, KnowledgeCategory.Conceptual)


# --- low-level scanning ---------------------------------------------------

def _is_fence(line: str) -> bool:
    return line.lstrip().startswith("```")


def _read_block(text: str, open_idx: int) -> tuple[str, int]:
    """Return (inner, index after close) for the block opened at `open_idx`.

    Braces inside quoted strings and inside fenced lines are opaque.
    """
    assert text[open_idx] == "{"
    depth = 1
    i = open_idx + 1
    in_fence = False
    line_start = True
    while i < len(text):
        if line_start:
            eol = text.find("\n", i)
            line = text[i:eol if eol != -1 else len(text)]
            if _is_fence(line):
                in_fence = not in_fence
                i = (eol + 1) if eol != -1 else len(text)
                continue
        c = text[i]
        line_start = c == "\n"
        if in_fence:
            i += 1
            continue
        if c == '"':
            i += 1
            while i < len(text) and text[i] != '"':
                i += 2 if text[i] == "\\" else 1
            i += 1
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[open_idx + 1:i], i + 1
        i += 1
    raise SpecError("unterminated block", _offset_pos(text, open_idx))


def _offset_pos(text: str, idx: int) -> Pos:
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return (line, col)


def _unquote(s: str) -> str:
    return s.replace('\\"', '"').replace("\\\\", "\\")


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


_OPTION_RE = re.compile(
    r"([a-z])\s*:\s*\"((?:[^\"\\]|\\.)*)\"\s*(\*)?"
    r"(?:\s+expect\s+(?:stdout\s*=\s*\"((?:[^\"\\]|\\.)*)\"|([A-Za-z_]\w*)\s*=\s*(-?\d+)))?"
    r"(?:\s+via\s+([\w-]+))?\s*")

_TARGET_RE = re.compile(r"(\w+)\s*x\s*(\w+)\s*")

_ANSWER_RES = [
    ("stdout", re.compile(r"stdout\s*=\s*\"((?:[^\"\\]|\\.)*)\"\s*")),
    ("binding", re.compile(r"([A-Za-z_]\w*)\s*=\s*(-?\d+)\s*")),
    ("text", re.compile(r"\"((?:[^\"\\]|\\.)*)\"\s*")),
    ("int", re.compile(r"(-?\d+)\s*")),
]


def extract_fences(question: str) -> list[tuple[str, int]]:
    """Return (code, first line number within question) per fenced block."""
    blocks: list[tuple[str, int]] = []
    current: list[str] | None = None
    start = 0
    for lineno, line in enumerate(question.splitlines(), 1):
        if _is_fence(line):
            if current is None:
                current = []
                start = lineno + 1
            else:
                blocks.append(("\n".join(current), start))
                current = None
        elif current is not None:
            current.append(line)
    if current is not None:
        raise SpecError("unterminated code fence in question")
    return blocks


# --- parsing ---------------------------------------------------------------

class _SpecParser:
    def __init__(self, text: str):
        self.text = text
        self.i = 0

    def pos(self, idx: int | None = None) -> Pos:
        return _offset_pos(self.text, self.i if idx is None else idx)

    def skip_ws(self) -> None:
        while self.i < len(self.text):
            c = self.text[self.i]
            if c in " \t\r\n":
                self.i += 1
            elif c == "#":
                nl = self.text.find("\n", self.i)
                self.i = len(self.text) if nl == -1 else nl
            else:
                return

    def take(self, pattern: re.Pattern) -> re.Match | None:
        m = pattern.match(self.text, self.i)
        if m is not None:
            self.i = m.end()
        return m

    def line_rest(self) -> str:
        nl = self.text.find("\n", self.i)
        end = len(self.text) if nl == -1 else nl
        out = self.text[self.i:end]
        self.i = end
        return out

    def parse(self) -> ExerciseSpec:
        self.skip_ws()
        m = self.take(re.compile(r'exercise\s+"((?:[^"\\]|\\.)*)"\s*'))
        if m is None:
            raise SpecError('expected: exercise "<id>" {', self.pos())
        spec_id = _unquote(m.group(1))
        if self.i >= len(self.text) or self.text[self.i] != "{":
            raise SpecError("expected '{' after exercise id", self.pos())
        body, after = _read_block(self.text, self.i)
        body_offset = self.i + 1
        tail = self.text[after:]
        if tail.strip():
            raise SpecError("trailing input after exercise block",
                            self.pos(after))
        return self.parse_body(body, body_offset, spec_id)

    def parse_body(self, body: str, offset: int, spec_id: str) -> ExerciseSpec:
        inner = _SpecParser(body)
        target: BloomCell | None = None
        requires: tuple[str, ...] = ()
        provenance: dict | None = None
        question: str | None = None
        options: tuple[McqOption, ...] = ()
        saw_mcq = False
        answer: Expectation | int | str | None = None
        saw_answer = False
        plan: Plan | None = None
        plan_line = 0

        def err_pos() -> Pos:
            return _offset_pos(self.text, offset + inner.i)

        while True:
            inner.skip_ws()
            if inner.i >= len(body):
                break
            word = re.match(r"[A-Za-z_]\w*", body[inner.i:])
            if word is None:
                raise SpecError(f"unexpected input {body[inner.i]!r}", err_pos())
            keyword = word.group()
            if keyword == "target":
                inner.i += len(keyword)
                inner.take(re.compile(r"\s*:\s*"))
                m = inner.take(_TARGET_RE)
                if m is None:
                    raise SpecError("expected: target: <Process> x <Knowledge>",
                                    err_pos())
                try:
                    target = BloomCell(ProcessCategory[m.group(1)],
                                       KnowledgeCategory[m.group(2)])
                except KeyError as exc:
                    raise SpecError(f"unknown category {exc.args[0]!r}",
                                    err_pos()) from None
            elif keyword == "requires":
                inner.i += len(keyword)
                inner.take(re.compile(r"\s*:\s*"))
                items = [s.strip() for s in inner.line_rest().split(",")]
                requires = tuple(s for s in items if s)
            elif keyword == "from":
                inner.i += len(keyword)
                inner.take(re.compile(r"\s*:\s*"))
                parts = inner.line_rest().split()
                if not parts:
                    raise SpecError("empty provenance line", err_pos())
                bindings = {}
                for part in parts[1:]:
                    if "=" not in part:
                        raise SpecError(f"bad provenance item {part!r}", err_pos())
                    k, _, v = part.partition("=")
                    bindings[k] = v
                provenance = {"template": parts[0], "bindings": bindings}
            elif keyword == "question":
                inner.i += len(keyword)
                inner.skip_ws()
                if inner.i >= len(body) or body[inner.i] != "{":
                    raise SpecError("expected '{' after question", err_pos())
                raw, inner.i = _read_block(body, inner.i)
                question = re.sub(r"^\n+", "", raw).rstrip()
            elif keyword == "mcq":
                inner.i += len(keyword)
                inner.skip_ws()
                if inner.i >= len(body) or body[inner.i] != "{":
                    raise SpecError("expected '{' after mcq", err_pos())
                raw, inner.i = _read_block(body, inner.i)
                options = self.parse_options(raw)
                saw_mcq = True
            elif keyword == "answer":
                inner.i += len(keyword)
                inner.take(re.compile(r"\s*:\s*"))
                answer = self.parse_answer(inner, err_pos)
                saw_answer = True
            elif keyword == "plan":
                inner.i += len(keyword)
                inner.skip_ws()
                if inner.i >= len(body) or body[inner.i] != "{":
                    raise SpecError("expected '{' after plan", err_pos())
                plan_line = _offset_pos(self.text, offset + inner.i)[0]
                raw, inner.i = _read_block(body, inner.i)
                try:
                    plan = parse_plan(raw)
                except PlanError as exc:
                    raise SpecError(f"bad plan: {exc.message}",
                                    (plan_line + exc.pos[0] - 1, exc.pos[1])) from exc
            else:
                raise SpecError(f"unknown section {keyword!r}", err_pos())

        if question is None:
            raise SpecError("missing question block", self.pos(offset))
        if saw_mcq and saw_answer:
            raise SpecError("spec has both mcq and answer", self.pos(offset))
        if not saw_mcq and not saw_answer:
            raise SpecError("spec needs an mcq block or an answer",
                            self.pos(offset))
        if saw_mcq:
            correct = [o for o in options if o.correct]
            if not correct:
                raise MissingCorrectOption("no option is marked correct",
                                           self.pos(offset))
            if len(correct) > 1:
                raise DuplicateCorrectOption(
                    f"options {', '.join(o.key for o in correct)} are all "
                    f"marked correct", self.pos(offset))

        sources = []
        programs = []
        for code, fence_line in extract_fences(question):
            try:
                programs.append(parse_program(code))
            except ParseError as exc:
                raise SpecError(
                    f"fenced code does not parse: {exc.message}",
                    (fence_line + exc.pos[0] - 1, exc.pos[1])) from exc
            sources.append(code)

        return ExerciseSpec(
            id=spec_id,
            declared_target=target if target is not None else DEFAULT_TARGET,
            target_declared=target is not None,
            requires=requires,
            provenance=provenance,
            question=question,
            options=options,
            answer=answer,
            plan=plan,
            code_sources=tuple(sources),
            programs=tuple(programs),
            plan_line=plan_line,
        )

    def parse_options(self, raw: str) -> tuple[McqOption, ...]:
        options: list[McqOption] = []
        seen: set[str] = set()
        for line in raw.splitlines():
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            m = _OPTION_RE.fullmatch(stripped)
            if m is None:
                raise SpecError(f"cannot parse option line: {stripped!r}")
            key, label, star, out, name, intval, via = m.groups()
            if key in seen:
                raise DuplicateOptionKey(f"duplicate option key {key!r}")
            seen.add(key)
            expect = None
            if out is not None:
                expect = Expectation("stdout", None, _unquote(out))
            elif name is not None:
                expect = Expectation("binding", name, int(intval))
            options.append(McqOption(key, _unquote(label), star is not None,
                                     expect, via))
        return tuple(options)

    def parse_answer(self, inner: "_SpecParser", err_pos) -> Expectation | int | str:
        for kind, pattern in _ANSWER_RES:
            m = inner.take(pattern)
            if m is None:
                continue
            if kind == "stdout":
                return Expectation("stdout", None, _unquote(m.group(1)))
            if kind == "binding":
                return Expectation("binding", m.group(1), int(m.group(2)))
            if kind == "text":
                return _unquote(m.group(1))
            return int(m.group(1))
        raise SpecError("cannot parse answer", err_pos())


def parse_spec(text: str) -> ExerciseSpec:
    """Parse an `.exr` document.  Raises SpecError (with position) on any
    malformed input, including fenced code that fails to parse."""
    return _SpecParser(text).parse()


# --- rendering --------------------------------------------------------------

def render(spec: ExerciseSpec) -> str:
    """Canonical text for a spec; `parse_spec(render(s))` equals `s`."""
    out = [f'exercise {_quote(spec.id)} {{']
    out.append(f"  target: {spec.declared_target.process.name} x "
               f"{spec.declared_target.knowledge.name}")
    if spec.requires:
        out.append(f"  requires: {', '.join(spec.requires)}")
    if spec.provenance:
        items = " ".join(f"{k}={v}" for k, v in spec.provenance["bindings"].items())
        line = f"  from: {spec.provenance['template']}"
        out.append(line + (f" {items}" if items else ""))
    out.append("  question {")
    out.append(spec.question)
    out.append("  }")
    if spec.options:
        out.append("  mcq {")
        for opt in spec.options:
            parts = [f"    {opt.key}: {_quote(opt.label)}"]
            if opt.correct:
                parts.append("*")
            if opt.expect is not None:
                if opt.expect.facet == "stdout":
                    parts.append(f"expect stdout = {_quote(str(opt.expect.value))}")
                else:
                    parts.append(f"expect {opt.expect.name} = {opt.expect.value}")
            if opt.via is not None:
                parts.append(f"via {opt.via}")
            out.append(" ".join(parts))
        out.append("  }")
    elif spec.answer is not None:
        if isinstance(spec.answer, Expectation):
            if spec.answer.facet == "stdout":
                out.append(f"  answer: stdout = {_quote(str(spec.answer.value))}")
            else:
                out.append(f"  answer: {spec.answer.name} = {spec.answer.value}")
        elif isinstance(spec.answer, str):
            out.append(f"  answer: {_quote(spec.answer)}")
        else:
            out.append(f"  answer: {spec.answer}")
    if spec.plan is not None:
        out.append(f"  plan {{ {render_plan_full(spec.plan)} }}")
    out.append("}")
    return "\n".join(out) + "\n"


# --- validation --------------------------------------------------------------

@dataclass(frozen=True)
class OptionOutcome:
    key: str
    status: str  # "confirmed" | "refuted" | "unverifiable" | "eval_failed"
    expected: int | str | None
    actual: int | str | None


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]
    options: dict[str, OptionOutcome]
    effect: Effect | None

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def to_json(self) -> dict:
        return {
            "findings": [f.to_json() for f in self.findings],
            "options": {k: {"status": o.status, "expected": o.expected,
                            "actual": o.actual}
                        for k, o in self.options.items()},
            "effect": self.effect.to_json() if self.effect else None,
        }


def _facet_actual(effect: Effect, expect: Expectation) -> int | str | None:
    if expect.facet == "stdout":
        return effect.stdout
    return effect.bindings.get(expect.name)


def validate_spec(spec: ExerciseSpec, fuel: int = 10_000) -> ValidationReport:
    """Check every option/answer expectation against the subject program.

    The subject program is the first fenced block of the question.  The
    correct option must be confirmed; a distractor whose expectation is
    confirmed is degenerate (it is not actually wrong).  Pure: equal specs
    yield equal reports.
    """
    findings: list[Finding] = []
    outcomes: dict[str, OptionOutcome] = {}
    effect: Effect | None = None
    if spec.programs:
        effect = evaluate(spec.programs[0], fuel)

    if not spec.target_declared:
        findings.append(Finding(
            "warning", "DefaultTarget",
            f"no target declared; assuming {DEFAULT_TARGET}"))

    if effect is not None and not effect.ok:
        findings.append(Finding(
            "error", "EvaluationFailed",
            f"subject program did not complete: {effect.status}"))

    labels: dict[str, str] = {}
    for opt in spec.options:
        if opt.label in labels:
            findings.append(Finding(
                "warning", "DuplicateLabel",
                f"options {labels[opt.label]!r} and {opt.key!r} share label "
                f"{opt.label!r}"))
        else:
            labels[opt.label] = opt.key

    for opt in spec.options:
        outcomes[opt.key] = _check_option(opt, effect, findings)

    if spec.mode is Mode.FREE:
        _check_answer(spec, effect, findings)

    return ValidationReport(tuple(sort_findings(findings)), outcomes, effect)


def _check_option(opt: McqOption, effect: Effect | None,
                  findings: list[Finding]) -> OptionOutcome:
    if opt.expect is None:
        if opt.correct:
            findings.append(Finding(
                "info", "Unverifiable",
                f"correct option {opt.key!r} has no expectation to check"))
        return OptionOutcome(opt.key, "unverifiable", None, None)
    if effect is None:
        findings.append(Finding(
            "warning", "Unverifiable",
            f"option {opt.key!r} has an expectation but the question has "
            f"no code to run"))
        return OptionOutcome(opt.key, "unverifiable", opt.expect.value, None)
    if not effect.ok:
        return OptionOutcome(opt.key, "eval_failed", opt.expect.value, None)
    actual = _facet_actual(effect, opt.expect)
    if actual == opt.expect.value:
        if not opt.correct:
            findings.append(Finding(
                "warning", "DegenerateDistractor",
                f"distractor {opt.key!r} claims the program's actual "
                f"behavior ({opt.expect.describe()})"))
        return OptionOutcome(opt.key, "confirmed", opt.expect.value, actual)
    if opt.correct:
        findings.append(Finding(
            "error", "CorrectOptionRefuted",
            f"correct option {opt.key!r} expects {opt.expect.describe()} "
            f"but the program yields {actual!r}"))
    return OptionOutcome(opt.key, "refuted", opt.expect.value, actual)


def _check_answer(spec: ExerciseSpec, effect: Effect | None,
                  findings: list[Finding]) -> None:
    answer = spec.answer
    if answer is None:
        findings.append(Finding("warning", "MissingAnswer",
                                "free-answer exercise declares no answer"))
        return
    if not isinstance(answer, Expectation):
        findings.append(Finding(
            "info", "Unverifiable",
            "answer is literal text/value; nothing to evaluate against"))
        return
    if effect is None:
        findings.append(Finding(
            "warning", "Unverifiable",
            "answer has an expectation but the question has no code to run"))
        return
    if not effect.ok:
        return  # EvaluationFailed already reported
    actual = _facet_actual(effect, answer)
    if actual != answer.value:
        findings.append(Finding(
            "error", "AnswerRefuted",
            f"answer expects {answer.describe()} but the program yields "
            f"{actual!r}"))
