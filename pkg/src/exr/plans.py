"""Solution-plan algebra: parsing, complexity typing, and linting.

A plan describes how a student is expected to solve an exercise.  Atoms
are `verb(Layer)` pairs, where the layer names the reasoning mode the
step runs in: Eval (executing code or rules), DR (reasoning about domain
objects), MDR (reasoning about the rules themselves, e.g. inferring what
code is for or writing new code).  Plans compose sequentially with `;`,
offer alternatives with `|`, and repeat with `(P)*`; `;` binds tighter
than `|`.  Named sub-plans may be given after `where` and referenced by
bare name.

Typing assigns each atom an effort score of 1 + process rank + knowledge
rank via a verb-to-cell map, and aggregates scores and cells across the
plan.  `cell_min_path`/`cell_max_path` are the componentwise envelopes of
the per-path maximal cells: the cell demand of the laziest viable path
and of the costliest one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .bloom import BloomCell, KnowledgeCategory, ProcessCategory
from .findings import Finding

Pos = tuple[int, int]


class Layer(Enum):
    Eval = "Eval"
    DR = "DR"
    MDR = "MDR"


def _pos() -> Pos:
    return (0, 0)


@dataclass(frozen=True)
class Atom:
    verb: str
    layer: Layer
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Seq:
    left: "PlanExpr"
    right: "PlanExpr"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Choice:
    left: "PlanExpr"
    right: "PlanExpr"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Star:
    body: "PlanExpr"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class RuleRef:
    name: str
    pos: Pos = field(default_factory=_pos, compare=False)


PlanExpr = Atom | Seq | Choice | Star | RuleRef


@dataclass(frozen=True)
class Plan:
    root: PlanExpr
    rules: dict[str, PlanExpr] = field(default_factory=dict)

    def expanded(self) -> PlanExpr:
        """Root with all named references substituted by their bodies."""
        return _expand(self.root, self.rules)


def _expand(e: PlanExpr, rules: dict[str, PlanExpr]) -> PlanExpr:
    if isinstance(e, Atom):
        return e
    if isinstance(e, RuleRef):
        return _expand(rules[e.name], rules)
    if isinstance(e, Seq):
        return Seq(_expand(e.left, rules), _expand(e.right, rules), e.pos)
    if isinstance(e, Choice):
        return Choice(_expand(e.left, rules), _expand(e.right, rules), e.pos)
    return Star(_expand(e.body, rules), e.pos)


class PlanError(Exception):
    def __init__(self, message: str, pos: Pos = (0, 0)):
        self.message = message
        self.pos = pos
        super().__init__(f"{pos[0]}:{pos[1]}: {message}")


# --- parsing ------------------------------------------------------------

_TOKEN_RE = re.compile(r"=>|[();|*,]|[A-Za-z_][A-Za-z0-9_]*")


def _tokenize(src: str) -> list[tuple[str, Pos]]:
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        c = src[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < len(src) and src[i] != "\n":
                i += 1
            continue
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise PlanError(f"unexpected character {c!r}", (line, col))
        toks.append((m.group(), (line, col)))
        col += len(m.group())
        i = m.end()
    toks.append(("", (line, col)))
    return toks


class _PlanParser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self, ahead: int = 0) -> tuple[str, Pos]:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> tuple[str, Pos]:
        t = self.toks[self.i]
        if t[0] != "":
            self.i += 1
        return t

    def expect(self, tok: str) -> Pos:
        got, pos = self.peek()
        if got != tok:
            raise PlanError(f"expected {tok!r}, found {got!r}", pos)
        self.next()
        return pos

    def plan(self) -> Plan:
        root = self.alternatives()
        rules: dict[str, PlanExpr] = {}
        if self.peek()[0] == "where":
            self.next()
            while True:
                name, pos = self.next()
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name or ""):
                    raise PlanError("expected sub-plan name", pos)
                if name in rules:
                    raise PlanError(f"duplicate sub-plan {name!r}", pos)
                self.expect("=>")
                rules[name] = self.alternatives()
                if self.peek()[0] != ",":
                    break
                self.next()
        tok, pos = self.peek()
        if tok != "":
            raise PlanError(f"trailing input {tok!r}", pos)
        return Plan(root, rules)

    def alternatives(self) -> PlanExpr:
        e = self.sequence()
        while self.peek()[0] == "|":
            _, pos = self.next()
            e = Choice(e, self.sequence(), pos)
        return e

    def sequence(self) -> PlanExpr:
        e = self.unit()
        while self.peek()[0] == ";":
            _, pos = self.next()
            e = Seq(e, self.unit(), pos)
        return e

    def unit(self) -> PlanExpr:
        tok, pos = self.peek()
        if tok == "(":
            self.next()
            inner = self.alternatives()
            self.expect(")")
            if self.peek()[0] == "*":
                self.next()
                return Star(inner, pos)
            return inner
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok or "") and tok != "where":
            self.next()
            if self.peek()[0] == "(":
                self.next()
                layer_tok, layer_pos = self.next()
                try:
                    layer = Layer[layer_tok]
                except KeyError:
                    raise PlanError(f"unknown layer {layer_tok!r}", layer_pos) from None
                self.expect(")")
                return Atom(tok, layer, pos)
            return RuleRef(tok, pos)
        raise PlanError(f"expected plan step, found {tok!r}", pos)


def parse_plan(source: str) -> Plan:
    """Parse a plan; named references must be defined and acyclic."""
    plan = _PlanParser(source).plan()

    def refs(e: PlanExpr) -> set[str]:
        if isinstance(e, RuleRef):
            return {e.name}
        if isinstance(e, (Seq, Choice)):
            return refs(e.left) | refs(e.right)
        if isinstance(e, Star):
            return refs(e.body)
        return set()

    def check(e: PlanExpr, stack: tuple[str, ...]) -> None:
        for name in refs(e):
            if name not in plan.rules:
                raise PlanError(f"undefined sub-plan {name!r}")
            if name in stack:
                raise PlanError(f"cyclic sub-plan {name!r}")
            check(plan.rules[name], stack + (name,))

    check(plan.root, ())
    for name, body in plan.rules.items():
        check(body, (name,))
    return plan


def render_plan(e: PlanExpr) -> str:
    if isinstance(e, Atom):
        return f"{e.verb}({e.layer.value})"
    if isinstance(e, RuleRef):
        return e.name
    if isinstance(e, Seq):
        return f"{render_plan(e.left)} ; {render_plan(e.right)}"
    if isinstance(e, Choice):
        left = render_plan(e.left)
        right = render_plan(e.right)
        return f"{left} | {right}"
    inner = render_plan(e.body)
    return f"({inner})*"


def render_plan_full(plan: Plan) -> str:
    out = render_plan(plan.root)
    if plan.rules:
        defs = ", ".join(f"{n} => {render_plan(b)}" for n, b in plan.rules.items())
        out += f" where {defs}"
    return out


# --- configuration ------------------------------------------------------

@dataclass(frozen=True)
class Weights:
    star_factor: float = 2.0
    missing_path_ratio: float = 4.0
    path_bound: int = 64


def load_weights(path: str | Path) -> Weights:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"(\w+)\s*=\s*([0-9.]+)", line)
        if m is None:
            raise ValueError(f"weights line {lineno}: cannot parse {raw!r}")
        values[m.group(1)] = float(m.group(2))
    known = {"star_factor", "missing_path_ratio", "path_bound"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown weight(s): {sorted(unknown)}")
    return Weights(
        star_factor=values.get("star_factor", 2.0),
        missing_path_ratio=values.get("missing_path_ratio", 4.0),
        path_bound=int(values.get("path_bound", 64)),
    )


VerbCellMap = dict[tuple[str, Layer], BloomCell]

_VERB_LINE = re.compile(
    r"verb\s+([\w-]+)@(\w+)\s*->\s*\(\s*(\w+)\s*,\s*(\w+)\s*\)")


def load_verb_map(path: str | Path) -> VerbCellMap:
    out: VerbCellMap = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _VERB_LINE.fullmatch(line)
        if m is None:
            raise ValueError(f"verb map line {lineno}: cannot parse {raw!r}")
        verb, layer, proc, know = m.groups()
        out[(verb, Layer[layer])] = BloomCell(ProcessCategory[proc],
                                              KnowledgeCategory[know])
    return out


# Cells assumed for atoms missing from the verb map.
DEFAULT_EVAL_CELL = BloomCell(ProcessCategory.Apply, KnowledgeCategory.Procedural)
DEFAULT_CELL = BloomCell(ProcessCategory.Understand, KnowledgeCategory.Conceptual)


def atom_score(cell: BloomCell) -> int:
    return 1 + int(cell.process) + int(cell.knowledge)


# --- typing -------------------------------------------------------------

@dataclass
class ComplexityReport:
    effort_min: float
    effort_max: float
    cell_min_path: BloomCell
    cell_max_path: BloomCell
    signatures: list[tuple[Layer, ...]]
    patterns: list[str]
    warnings: list[Finding]
    truncated: bool

    def to_json(self) -> dict:
        return {
            "effort_min": self.effort_min,
            "effort_max": self.effort_max,
            "cell_min_path": [self.cell_min_path.process.name,
                              self.cell_min_path.knowledge.name],
            "cell_max_path": [self.cell_max_path.process.name,
                              self.cell_max_path.knowledge.name],
            "signatures": [[layer.value for layer in sig]
                           for sig in self.signatures],
            "patterns": self.patterns,
            "warnings": [w.to_json() for w in self.warnings],
            "truncated": self.truncated,
        }


PATTERNS = {
    "P1": (Layer.DR, Layer.Eval, Layer.DR),
    "P2": (Layer.DR, Layer.MDR, Layer.DR),
    "P3": (Layer.MDR, Layer.DR, Layer.Eval),
}


def detect_patterns(signatures: list[tuple[Layer, ...]]) -> list[str]:
    """Layer-oscillation patterns occurring contiguously in any signature."""
    found = set()
    for sig in signatures:
        for i in range(len(sig) - 2):
            window = sig[i:i + 3]
            for pid, shape in PATTERNS.items():
                if window == shape:
                    found.add(pid)
    return sorted(found)


class _Typing:
    """Memoized per-node typing over an expanded plan."""

    def __init__(self, verb_cells: VerbCellMap, weights: Weights):
        self.verb_cells = verb_cells
        self.weights = weights
        self.warnings: list[Finding] = []
        self._seen_unmapped: set[tuple[str, Layer]] = set()
        self._memo: dict[int, tuple] = {}

    def cell_of(self, atom: Atom) -> BloomCell:
        cell = self.verb_cells.get((atom.verb, atom.layer))
        if cell is None:
            key = (atom.verb, atom.layer)
            if key not in self._seen_unmapped:
                self._seen_unmapped.add(key)
                self.warnings.append(Finding(
                    "warning", "Unmapped",
                    f"no cell mapped for {atom.verb}@{atom.layer.value}; "
                    f"assuming default", atom.pos))
            cell = DEFAULT_EVAL_CELL if atom.layer is Layer.Eval else DEFAULT_CELL
        return cell

    def analyze(self, e: PlanExpr) -> tuple[float, float, BloomCell, BloomCell]:
        """(effort_min, effort_max, cell envelope min, cell envelope max)."""
        hit = self._memo.get(id(e))
        if hit is not None:
            return hit
        if isinstance(e, Atom):
            cell = self.cell_of(e)
            score = float(atom_score(cell))
            out = (score, score, cell, cell)
        elif isinstance(e, Seq):
            l = self.analyze(e.left)
            r = self.analyze(e.right)
            out = (l[0] + r[0], l[1] + r[1],
                   l[2].max_with(r[2]), l[3].max_with(r[3]))
        elif isinstance(e, Choice):
            l = self.analyze(e.left)
            r = self.analyze(e.right)
            out = (min(l[0], r[0]), max(l[1], r[1]),
                   l[2].min_with(r[2]), l[3].max_with(r[3]))
        elif isinstance(e, Star):
            b = self.analyze(e.body)
            k = self.weights.star_factor
            out = (k * b[0], k * b[1], b[2], b[3])
        else:
            raise PlanError(f"unresolved reference {e.name!r}", e.pos)
        self._memo[id(e)] = out
        return out

    def min_path_atoms(self, e: PlanExpr) -> list[Atom]:
        """Atoms along the cheapest path (star body taken once per factor)."""
        if isinstance(e, Atom):
            return [e]
        if isinstance(e, Seq):
            return self.min_path_atoms(e.left) + self.min_path_atoms(e.right)
        if isinstance(e, Choice):
            l = self.analyze(e.left)[0]
            r = self.analyze(e.right)[0]
            side = e.left if l <= r else e.right
            return self.min_path_atoms(side)
        return self.min_path_atoms(e.body)


def _signatures(e: PlanExpr, bound: int) -> tuple[list[tuple[Layer, ...]], bool]:
    if isinstance(e, Atom):
        return [(e.layer,)], False
    if isinstance(e, Seq):
        left, tl = _signatures(e.left, bound)
        right, tr = _signatures(e.right, bound)
        out: list[tuple[Layer, ...]] = []
        for a in left:
            for b in right:
                out.append(a + b)
                if len(out) > bound:
                    return out[:bound], True
        return out, tl or tr
    if isinstance(e, Choice):
        left, tl = _signatures(e.left, bound)
        right, tr = _signatures(e.right, bound)
        out = left + right
        if len(out) > bound:
            return out[:bound], True
        return out, tl or tr
    if isinstance(e, Star):
        # one unrolling exposes the loop's layer oscillation
        return _signatures(e.body, bound)
    raise PlanError(f"unresolved reference {e.name!r}", e.pos)


def type_plan(plan: Plan, verb_cells: VerbCellMap,
              weights: Weights | None = None) -> ComplexityReport:
    """Aggregate effort scores and cell demands across a plan."""
    weights = weights or Weights()
    expanded = plan.expanded()
    typing = _Typing(verb_cells, weights)
    effort_min, effort_max, cell_min, cell_max = typing.analyze(expanded)
    signatures, truncated = _signatures(expanded, weights.path_bound)
    warnings = list(typing.warnings)
    if truncated:
        warnings.append(Finding(
            "warning", "PathExplosion",
            f"more than {weights.path_bound} paths; signature list truncated",
            None))
    return ComplexityReport(
        effort_min=effort_min,
        effort_max=effort_max,
        cell_min_path=cell_min,
        cell_max_path=cell_max,
        signatures=signatures,
        patterns=detect_patterns(signatures),
        warnings=warnings,
        truncated=truncated,
    )


# --- linting ------------------------------------------------------------

@dataclass(frozen=True)
class MissingPathFlag:
    """A sequence whose sides differ so much in effort that students are
    likely to skip the cheap side entirely."""
    site: PlanExpr = field(compare=False)
    site_label: str
    site_pos: Pos
    other_pos: Pos
    ratio: float
    threshold: float

    def to_finding(self) -> Finding:
        return Finding(
            "warning", "MissingPath",
            f"step '{self.site_label}' is {self.ratio:.2f}x cheaper than its "
            f"sibling at {self.other_pos[0]}:{self.other_pos[1]} "
            f"(threshold {self.threshold:g}); students may skip it",
            self.site_pos)


def plan_summary(e: PlanExpr) -> str:
    """Short human label for a subplan: its first atom verb."""
    if isinstance(e, Atom):
        return e.verb
    if isinstance(e, (Seq, Choice)):
        return plan_summary(e.left)
    if isinstance(e, Star):
        return plan_summary(e.body)
    return e.name


def missing_path_lint(plan: Plan, verb_cells: VerbCellMap,
                      weights: Weights | None = None) -> list[MissingPathFlag]:
    """Flag Seq nodes with an effort imbalance at or above the threshold.

    The flagged site is the cheaper side; the ratio is larger/smaller
    effort along each side's cheapest path.
    """
    weights = weights or Weights()
    typing = _Typing(verb_cells, weights)
    flags: list[MissingPathFlag] = []

    def walk(e: PlanExpr) -> None:
        if isinstance(e, Seq):
            el = typing.analyze(e.left)[0]
            er = typing.analyze(e.right)[0]
            small, large = (e.left, e.right) if el <= er else (e.right, e.left)
            small_e, large_e = min(el, er), max(el, er)
            ratio = float("inf") if small_e == 0 else large_e / small_e
            if large_e > 0 and ratio >= weights.missing_path_ratio:
                flags.append(MissingPathFlag(
                    site=small,
                    site_label=plan_summary(small),
                    site_pos=_expr_pos(small),
                    other_pos=_expr_pos(large),
                    ratio=ratio,
                    threshold=weights.missing_path_ratio))
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Choice):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Star):
            walk(e.body)

    walk(plan.expanded())
    return flags


def _expr_pos(e: PlanExpr) -> Pos:
    if isinstance(e, (Atom, Star, RuleRef)):
        return e.pos
    return _expr_pos(e.left)


# --- declared-vs-computed check ------------------------------------------

def consistency_check(declared: BloomCell | None, plan: Plan | None,
                      verb_cells: VerbCellMap,
                      weights: Weights | None = None) -> list[Finding]:
    """Compare an exercise's declared target cell against its plan's typing.

    Returns warnings for a missing plan, unmapped verbs, skip-prone
    sequences, and a declared cell outside the typed [min, max] interval
    on either dimension.
    """
    weights = weights or Weights()
    if plan is None:
        return [Finding("warning", "MissingPlan",
                        "exercise has no plan; complexity cannot be checked")]
    report = type_plan(plan, verb_cells, weights)
    findings = list(report.warnings)
    findings.extend(f.to_finding() for f in missing_path_lint(plan, verb_cells, weights))
    if declared is not None:
        lo, hi = report.cell_min_path, report.cell_max_path
        bad_dims = []
        if not (lo.process <= declared.process <= hi.process):
            bad_dims.append(f"process {declared.process.name} outside "
                            f"[{lo.process.name}, {hi.process.name}]")
        if not (lo.knowledge <= declared.knowledge <= hi.knowledge):
            bad_dims.append(f"knowledge {declared.knowledge.name} outside "
                            f"[{lo.knowledge.name}, {hi.knowledge.name}]")
        if bad_dims:
            findings.append(Finding(
                "warning", "Discrepancy",
                "declared target does not match plan typing: " + "; ".join(bad_dims)))
    return findings
