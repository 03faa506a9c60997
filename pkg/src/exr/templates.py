"""Exercise templates: parameterized text rules and seeded instantiation.

A template pack is a text file of rules::

    #name(param, ...) [-> spec]
    body with $param holes and {rule_or_transform(args)} calls
    #end

`$param` splices a binding value.  `{name(args)}` calls another rule or
applies a transform; braces that do not look like a call (``{return x;}``,
array literals) pass through untouched, so template bodies can contain
code.  Arguments are binding names, integer or quoted string literals, or
nested calls.

Rules marked ``-> spec`` expand to an exercise document.  Inside their
``mcq`` block, directive lines pick the options:

    @correct stdout            (or: @correct <binding name>)
    @distractor transform(param)

`instantiate_exercise` expands the rule, runs the first fenced program to
pin the correct option's facet, then re-expands with mutated bindings for
each distractor.  A distractor whose program misbehaves or whose facet or
label collides with an already accepted option is retried with the
transform's next candidate, up to eight attempts, then dropped.  Option
order is shuffled with the given seed and a ``from:`` provenance line
records the template and bindings, so output is fully deterministic.

Transforms produce "plausibly wrong" values: `buggy_limit` and
`buggy_init` shift a loop bound by whole steps, `buggy_step` nudges the
stride, `buggy_op` swaps an operator for a close relative, and `cap`
upper-cases the first letter (for accessor names).
"""

from __future__ import annotations

import dataclasses
import random
import re
from dataclasses import dataclass
from pathlib import Path

from .minilang import ParseError, evaluate, parse_program
from .specdsl import SpecError, _quote, extract_fences, parse_spec, render

_HEADER_RE = re.compile(r"^#([A-Za-z_]\w*)\(([^()]*)\)(?:\s*->\s*(\w+))?\s*$")
_END_RE = re.compile(r"^#end\s*$")
_CALL_RE = re.compile(r"\{([A-Za-z_]\w*)\(")
_HOLE_RE = re.compile(r"\$([A-Za-z_]\w*)")
_INT_RE = re.compile(r"-?\d+$")
_DIRECTIVE_RE = re.compile(
    r"^(\s*)@(correct|distractor)\s+([A-Za-z_]\w*)(?:\((\w+)\))?\s*$")


class TemplateError(Exception):
    pass


class UnboundParam(TemplateError):
    pass


class UnknownRule(TemplateError):
    pass


class CycleDetected(TemplateError):
    pass


# --- transforms ---------------------------------------------------------------

def _require_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TemplateError(f"{name} needs an integer, got {value!r}")
    return value


def _alternating(v: int, s: int, minus_first: bool) -> list[int]:
    out = []
    for k in range(1, 5):
        pair = [v - k * s, v + k * s] if minus_first else [v + k * s, v - k * s]
        out.extend(pair)
    return out


def _step_of(bindings: dict) -> int:
    step = bindings.get("step", 1)
    return step if isinstance(step, int) and step != 0 else 1


def buggy_limit(value, attempt: int, bindings: dict):
    """Loop limit off by a whole stride: first guess one step short."""
    v = _require_int("buggy_limit", value)
    candidates = _alternating(v, _step_of(bindings), minus_first=True)
    return candidates[attempt] if attempt < len(candidates) else None


def buggy_init(value, attempt: int, bindings: dict):
    """Starting value off by a whole stride: first guess one step late."""
    v = _require_int("buggy_init", value)
    candidates = _alternating(v, _step_of(bindings), minus_first=False)
    return candidates[attempt] if attempt < len(candidates) else None


def buggy_step(value, attempt: int, bindings: dict):
    """Stride off by one (never below 1, which keeps loops terminating)."""
    v = _require_int("buggy_step", value)
    candidates = [c for c in _alternating(v, 1, minus_first=False) if c >= 1]
    return candidates[attempt] if attempt < len(candidates) else None


_OP_FAMILIES = [["<", "<=", ">", ">="], ["+=", "-="], ["==", "!="]]
_OP_PAIR = {"<": "<=", "<=": "<", ">": ">=", ">=": ">",
            "+=": "-=", "-=": "+=", "==": "!=", "!=": "=="}


def buggy_op(value, attempt: int, bindings: dict):
    """Swap an operator for its near miss, then rotate the family."""
    if value not in _OP_PAIR:
        raise TemplateError(f"buggy_op cannot vary {value!r}")
    family = next(f for f in _OP_FAMILIES if value in f)
    candidates = [_OP_PAIR[value]]
    candidates += [op for op in family if op != value and op not in candidates]
    return candidates[attempt] if attempt < len(candidates) else None


def cap(value, attempt: int, bindings: dict):
    """First letter upper-cased; used for accessor method names."""
    if not isinstance(value, str) or not value:
        raise TemplateError(f"cap needs a nonempty string, got {value!r}")
    return value[:1].upper() + value[1:] if attempt == 0 else None


TRANSFORMS = {
    "buggy_limit": buggy_limit,
    "buggy_init": buggy_init,
    "buggy_step": buggy_step,
    "buggy_op": buggy_op,
    "cap": cap,
}


# --- packs ----------------------------------------------------------------------

@dataclass(frozen=True)
class TemplateRule:
    name: str
    params: tuple[str, ...]
    kind: str | None  # "spec" for exercise metaplans
    body: str


@dataclass(frozen=True)
class TemplatePack:
    name: str
    rules: dict[str, TemplateRule]

    @classmethod
    def from_text(cls, text: str, name: str = "<pack>") -> "TemplatePack":
        return _parse_pack(text, name)

    @classmethod
    def from_file(cls, path: str | Path) -> "TemplatePack":
        path = Path(path)
        return _parse_pack(path.read_text(), path.stem)


def _parse_pack(text: str, pack_name: str) -> TemplatePack:
    rules: dict[str, TemplateRule] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.strip() or line.startswith("# ") or line.strip() == "#":
            i += 1
            continue
        m = _HEADER_RE.match(line)
        if m is None:
            raise TemplateError(
                f"{pack_name}:{i + 1}: expected a rule header, got {line!r}")
        name = m.group(1)
        if name in rules:
            raise TemplateError(f"{pack_name}: duplicate rule {name!r}")
        params = tuple(p.strip() for p in m.group(2).split(",") if p.strip())
        kind = m.group(3)
        if kind is not None and kind != "spec":
            raise TemplateError(
                f"{pack_name}: rule {name}: unknown kind {kind!r}")
        body_lines = []
        i += 1
        while i < len(lines) and not _END_RE.match(lines[i]):
            body_lines.append(lines[i])
            i += 1
        if i >= len(lines):
            raise TemplateError(f"{pack_name}: rule {name} has no #end")
        i += 1
        body = "\n".join(body_lines).rstrip()
        rules[name] = TemplateRule(name, params, kind, body)
    if not rules:
        raise TemplateError(f"{pack_name}: no rules found")
    pack = TemplatePack(pack_name, rules)
    _validate_pack(pack)
    return pack


def _top_level_calls(body: str) -> list[str]:
    """Names of well-formed `{name(args)}` calls in a body.  A brace that
    does not scan as a call (code blocks, array literals) is plain text."""
    out = []
    for m in _CALL_RE.finditer(body):
        if _scan_call_args(body, m.end()) is not None:
            out.append(m.group(1))
    return out


def _validate_pack(pack: TemplatePack) -> None:
    for rule in pack.rules.values():
        for hole in _HOLE_RE.findall(rule.body):
            if hole not in rule.params:
                raise UnboundParam(
                    f"{pack.name}: rule {rule.name} uses ${hole} "
                    "which is not a parameter")
        for callee in _top_level_calls(rule.body):
            if callee not in pack.rules and callee not in TRANSFORMS:
                raise UnknownRule(
                    f"{pack.name}: rule {rule.name} calls unknown {callee!r}")
    color: dict[str, int] = {}

    def visit(name: str, trail: tuple[str, ...]) -> None:
        color[name] = 1
        for callee in _top_level_calls(pack.rules[name].body):
            if callee not in pack.rules:
                continue
            if color.get(callee) == 1:
                raise CycleDetected(
                    f"{pack.name}: rule cycle {' -> '.join(trail + (callee,))}")
            if color.get(callee) != 2:
                visit(callee, trail + (callee,))
        color[name] = 2

    for name in pack.rules:
        if color.get(name) != 2:
            visit(name, (name,))


# --- expansion -------------------------------------------------------------------

def _split_args(src: str) -> list[str]:
    out = []
    depth = 0
    quoted = False
    current = []
    for ch in src:
        if quoted:
            current.append(ch)
            if ch == '"':
                quoted = False
        elif ch == '"':
            current.append(ch)
            quoted = True
        elif ch == "(":
            depth += 1
            current.append(ch)
        elif ch == ")":
            depth -= 1
            current.append(ch)
        elif ch == "," and depth == 0:
            out.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    tail = "".join(current).strip()
    if tail:
        out.append(tail)
    return out


def _resolve_arg(pack: TemplatePack, src: str, bindings: dict):
    if _INT_RE.match(src):
        return int(src)
    if len(src) >= 2 and src[0] == '"' and src[-1] == '"':
        return src[1:-1]
    call = re.match(r"([A-Za-z_]\w*)\((.*)\)$", src)
    if call:
        return _resolve_call(pack, call.group(1), call.group(2), bindings)
    if re.fullmatch(r"[A-Za-z_]\w*", src):
        if src not in bindings:
            raise UnboundParam(f"no binding for {src!r}")
        return bindings[src]
    raise TemplateError(f"cannot parse argument {src!r}")


def _resolve_call(pack: TemplatePack, name: str, args_src: str,
                  bindings: dict):
    args = [_resolve_arg(pack, a, bindings) for a in _split_args(args_src)]
    if name in pack.rules:
        rule = pack.rules[name]
        if len(args) != len(rule.params):
            raise TemplateError(
                f"rule {name} takes {len(rule.params)} argument(s), "
                f"got {len(args)}")
        return expand(pack, name, dict(zip(rule.params, args)))
    if name in TRANSFORMS:
        if len(args) != 1:
            raise TemplateError(f"transform {name} takes 1 argument")
        value = TRANSFORMS[name](args[0], 0, bindings)
        if value is None:
            raise TemplateError(f"transform {name} has no candidate")
        return value
    raise UnknownRule(f"unknown rule or transform {name!r}")


def expand(pack: TemplatePack, name: str, bindings: dict) -> str:
    """Expand one rule with the given bindings.

    Single pass, left to right: call results and spliced values are not
    re-scanned, so expanded code containing `$` or braces stays intact.
    """
    rule = pack.rules.get(name)
    if rule is None:
        raise UnknownRule(f"unknown rule {name!r}")
    missing = [p for p in rule.params if p not in bindings]
    if missing:
        raise UnboundParam(f"rule {name} is missing bindings for "
                           + ", ".join(missing))
    out = []
    body = rule.body
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "$":
            hole = _HOLE_RE.match(body, i)
            if hole is None:
                out.append(ch)
                i += 1
                continue
            out.append(str(bindings[hole.group(1)]))
            i = hole.end()
            continue
        if ch == "{":
            call = _CALL_RE.match(body, i)
            scan = _scan_call_args(body, call.end()) if call else None
            if scan is not None:
                args_src, after = scan
                out.append(str(_resolve_call(pack, call.group(1),
                                             args_src, bindings)))
                i = after
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _scan_call_args(body: str, start: int) -> tuple[str, int] | None:
    """From just after the opening parenthesis, return (args text, index
    past the closing `)}`), or None when the text is not a call."""
    depth = 1
    quoted = False
    i = start
    while i < len(body):
        ch = body[i]
        if quoted:
            quoted = ch != '"'
        elif ch == '"':
            quoted = True
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                if i + 1 < len(body) and body[i + 1] == "}":
                    return body[start:i], i + 2
                return None
        i += 1
    return None


# --- exercise instantiation -------------------------------------------------------

_OPTION_KEYS = "abcdefghijklmnopqrstuvwxyz"


@dataclass
class _Draft:
    label: str
    facet_value: object
    correct: bool
    via: str | None


def _first_program(text: str, fuel: int):
    fences = extract_fences(text)
    if not fences:
        raise TemplateError("metaplan has no fenced program to evaluate")
    program = parse_program(fences[0][0])
    return evaluate(program, fuel)


def _facet_value(effect, facet: str):
    if facet == "stdout":
        return effect.stdout
    if facet not in effect.bindings:
        raise TemplateError(f"program has no binding {facet!r}")
    return effect.bindings[facet]


def _facet_label(facet: str, value) -> str:
    return value.rstrip() if facet == "stdout" else str(value)


def _option_line(indent: str, key: str, draft: _Draft, facet: str) -> str:
    parts = [f"{indent}{key}: {_quote(draft.label)}"]
    if draft.correct:
        parts.append("*")
    if facet == "stdout":
        parts.append(f"expect stdout = {_quote(draft.facet_value)}")
    else:
        parts.append(f"expect {facet} = {draft.facet_value}")
    if draft.via:
        parts.append(f"via {draft.via}")
    return " ".join(parts)


def instantiate_exercise(pack: TemplatePack, name: str, bindings: dict,
                         seed: int = 0, fuel: int = 100_000) -> str:
    """Expand a `-> spec` rule into a finished, canonical exercise text."""
    rule = pack.rules.get(name)
    if rule is None:
        raise UnknownRule(f"unknown rule {name!r}")
    if rule.kind != "spec":
        raise TemplateError(f"rule {name} does not produce an exercise")
    text = expand(pack, name, bindings)
    lines = text.splitlines()
    directives = [(idx, _DIRECTIVE_RE.match(line))
                  for idx, line in enumerate(lines)
                  if _DIRECTIVE_RE.match(line)]

    if directives:
        lines = _resolve_directives(pack, name, bindings, seed, fuel,
                                    lines, directives)
    assembled = "\n".join(lines) + "\n"
    try:
        spec = parse_spec(assembled)
    except SpecError as exc:
        raise TemplateError(
            f"rule {name} expanded to an invalid exercise: {exc}") from exc
    provenance = {
        "template": name,
        "bindings": {"seed": str(seed),
                     **{k: str(v) for k, v in bindings.items()}},
    }
    return render(dataclasses.replace(spec, provenance=provenance))


def _resolve_directives(pack, name, bindings, seed, fuel, lines, directives):
    corrects = [(i, m) for i, m in directives if m.group(2) == "correct"]
    if len(corrects) != 1:
        raise TemplateError(
            f"rule {name} needs exactly one @correct directive")
    facet = corrects[0][1].group(3)
    base_effect = _first_program("\n".join(lines), fuel)
    if base_effect.status != "Completed":
        raise TemplateError(
            f"rule {name}: base program did not complete ({base_effect.status})")
    correct_value = _facet_value(base_effect, facet)
    drafts = [_Draft(_facet_label(facet, correct_value), correct_value,
                     True, None)]

    for _, m in directives:
        if m.group(2) != "distractor":
            continue
        transform_name, param = m.group(3), m.group(4)
        if transform_name not in TRANSFORMS:
            raise UnknownRule(f"unknown transform {transform_name!r}")
        if param is None or param not in bindings:
            raise UnboundParam(
                f"@distractor {transform_name} needs a bound parameter")
        transform = TRANSFORMS[transform_name]
        for attempt in range(8):
            candidate = transform(bindings[param], attempt, bindings)
            if candidate is None:
                break
            mutated = {**bindings, param: candidate}
            try:
                effect = _first_program(expand(pack, name, mutated), fuel)
            except (ParseError, SpecError):
                continue
            if effect.status != "Completed":
                continue
            value = _facet_value(effect, facet)
            label = _facet_label(facet, value)
            if any(value == d.facet_value or label == d.label
                   for d in drafts):
                continue
            drafts.append(_Draft(label, value, False, transform_name))
            break

    rng = random.Random(seed)
    rng.shuffle(drafts)
    indent = directives[0][1].group(1)
    option_lines = [_option_line(indent, _OPTION_KEYS[j], draft, facet)
                    for j, draft in enumerate(drafts)]
    directive_idxs = {i for i, _ in directives}
    first = min(directive_idxs)
    out = []
    for idx, line in enumerate(lines):
        if idx == first:
            out.extend(option_lines)
        elif idx in directive_idxs:
            continue
        else:
            out.append(line)
    return out
