"""Rewrite rules: pattern matching, guards, instantiation, rule packs.

A rule clause has the shape::

    rule NAME KIND tags(tag, ...) :
        PATTERN [where GUARD, ...] => [SUBTASK ; ...] ~> REBUILD

PATTERN may use pattern variables (``?x``), one segment variable per
``+``/``*`` node (``?*rest``), and head variables (``?f(...)``) that match
any uninterpreted operator.  GUARDs restrict bindings (``const``, ``sym``,
``not_const``, ``not_equal``).  SUBTASKs are new terms built from the
binding; REBUILD combines the binding with subtask results ``#1``, ``#2``,
... into the replacement term.

Several clauses may share a NAME; they are tried in file order and act as
one rule with alternatives.  KIND is ``expert`` for sound steps or
``buggy`` for deliberately unsound ones used in diagnosis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator

from .terms import (
    AC_OPS, App, Const, CORE_OPS, PHead, PSeg, PVar, SubRef, Sym, Term,
    TermError, flatten_ac, parse_term,
)

# A binding maps pattern-variable names to subject subterms, head-variable
# names to operator names (str), and segment names to ("seg", op, items).
Binding = dict[str, object]

_GUARD_NAMES = {"const": 1, "sym": 1, "not_const": 1, "not_equal": 2}


class RuleError(Exception):
    pass


# --- matching ---------------------------------------------------------------

def match_term(pattern: Term, subject: Term) -> Iterator[Binding]:
    """Yield every binding under which `pattern` matches `subject`.

    Matching is associative-commutative for ``+`` and ``*``: fixed
    sub-patterns may take the subject's arguments in any order, and a
    segment variable absorbs whatever is left (possibly nothing).
    """
    yield from _match(pattern, subject, {})


def _match(p: Term, s: Term, b: Binding) -> Iterator[Binding]:
    if isinstance(p, PVar):
        if p.name in b:
            if b[p.name] == s:
                yield b
        else:
            nb = dict(b)
            nb[p.name] = s
            yield nb
        return
    if isinstance(p, Const):
        if isinstance(s, Const) and p.value == s.value:
            yield b
        return
    if isinstance(p, Sym):
        if isinstance(s, Sym) and p.name == s.name:
            yield b
        return
    if isinstance(p, PHead):
        if not (isinstance(s, App) and s.op not in CORE_OPS
                and len(s.args) == len(p.args)):
            return
        if p.head in b:
            if b[p.head] != s.op:
                return
            nb = b
        else:
            nb = dict(b)
            nb[p.head] = s.op
        yield from _match_seq(p.args, s.args, nb)
        return
    if isinstance(p, (PSeg, SubRef)):
        raise RuleError(f"{p!r} cannot stand alone in a pattern")
    assert isinstance(p, App)
    if p.op in AC_OPS:
        yield from _match_ac(p, s, b)
        return
    if isinstance(s, App) and s.op == p.op and len(s.args) == len(p.args):
        yield from _match_seq(p.args, s.args, b)


def _match_seq(ps: tuple[Term, ...], ss: tuple[Term, ...],
               b: Binding) -> Iterator[Binding]:
    if not ps:
        yield b
        return
    for nb in _match(ps[0], ss[0], b):
        yield from _match_seq(ps[1:], ss[1:], nb)


def _match_ac(p: App, s: Term, b: Binding) -> Iterator[Binding]:
    op = p.op
    sargs = list(s.args) if isinstance(s, App) and s.op == op else [s]
    segs = [a for a in p.args if isinstance(a, PSeg)]
    fixed = [a for a in p.args if not isinstance(a, PSeg)]
    if len(segs) > 1:
        raise RuleError(f"more than one segment variable under {op!r}")
    if len(fixed) > len(sargs) or (not segs and len(fixed) != len(sargs)):
        return

    def assign(k: int, used: frozenset[int], bind: Binding) -> Iterator[Binding]:
        if k == len(fixed):
            if not segs:
                yield bind
                return
            rest = tuple(a for i, a in enumerate(sargs) if i not in used)
            entry = ("seg", op, rest)
            name = segs[0].name
            if name in bind:
                if bind[name] == entry:
                    yield bind
                return
            nb = dict(bind)
            nb[name] = entry
            yield nb
            return
        for i, arg in enumerate(sargs):
            if i in used:
                continue
            for nb in _match(fixed[k], arg, bind):
                yield from assign(k + 1, used | {i}, nb)

    yield from assign(0, frozenset(), b)


# --- instantiation ----------------------------------------------------------

def instantiate(template: Term, binding: Binding,
                subresults: tuple[Term, ...] = ()) -> Term:
    """Fill a template with a binding and (for rebuilds) subtask results."""
    if isinstance(template, (Const, Sym)):
        return template
    if isinstance(template, PVar):
        value = binding.get(template.name)
        if value is None:
            raise RuleError(f"unbound variable ?{template.name}")
        if not isinstance(value, (Const, Sym, App)):
            raise RuleError(f"?{template.name} is not bound to a term")
        return value
    if isinstance(template, SubRef):
        if not 1 <= template.index <= len(subresults):
            raise RuleError(f"no subtask result #{template.index}")
        return subresults[template.index - 1]
    if isinstance(template, PSeg):
        entry = binding.get(template.name)
        if not (isinstance(entry, tuple) and entry and entry[0] == "seg"):
            raise RuleError(f"unbound segment ?*{template.name}")
        return _seg_term(entry)
    if isinstance(template, PHead):
        head = binding.get(template.head)
        if not isinstance(head, str):
            raise RuleError(f"unbound head variable ?{template.head}")
        return App(head, tuple(instantiate(a, binding, subresults)
                               for a in template.args))
    assert isinstance(template, App)
    out: list[Term] = []
    for arg in template.args:
        if isinstance(arg, PSeg):
            entry = binding.get(arg.name)
            if not (isinstance(entry, tuple) and entry and entry[0] == "seg"):
                raise RuleError(f"unbound segment ?*{arg.name}")
            if entry[1] == template.op:
                out.extend(entry[2])
                continue
            out.append(_seg_term(entry))
        else:
            out.append(instantiate(arg, binding, subresults))
    return App(template.op, tuple(out))


def _seg_term(entry: tuple) -> Term:
    _, op, items = entry
    if not items:
        return Const(Fraction(0 if op == "+" else 1))
    if len(items) == 1:
        return items[0]
    return App(op, tuple(items))


# --- guards -----------------------------------------------------------------

@dataclass(frozen=True)
class Guard:
    name: str
    args: tuple[Term, ...]

    def holds(self, binding: Binding) -> bool:
        values = [instantiate(a, binding) for a in self.args]
        if self.name == "const":
            return isinstance(values[0], Const)
        if self.name == "sym":
            return isinstance(values[0], Sym)
        if self.name == "not_const":
            return not isinstance(values[0], Const)
        if self.name == "not_equal":
            return values[0] != values[1]
        raise RuleError(f"unknown guard {self.name!r}")


def check_guards(guards: tuple[Guard, ...], binding: Binding) -> bool:
    return all(g.holds(binding) for g in guards)


# --- rules and packs --------------------------------------------------------

@dataclass(frozen=True)
class RewriteRule:
    name: str
    kind: str  # "expert" | "buggy"
    tags: frozenset[str]
    pattern: Term
    guards: tuple[Guard, ...]
    subtasks: tuple[Term, ...]
    rebuild: Term

    def matches(self, subject: Term) -> Iterator[Binding]:
        for binding in match_term(self.pattern, subject):
            if check_guards(self.guards, binding):
                yield binding


@dataclass(frozen=True)
class RulePack:
    name: str
    rules: tuple[RewriteRule, ...]

    @property
    def rule_names(self) -> tuple[str, ...]:
        seen: list[str] = []
        for r in self.rules:
            if r.name not in seen:
                seen.append(r.name)
        return tuple(seen)

    def clauses(self, name: str) -> tuple[RewriteRule, ...]:
        return tuple(r for r in self.rules if r.name == name)

    def only(self, kind: str) -> tuple[RewriteRule, ...]:
        return tuple(r for r in self.rules if r.kind == kind)

    @classmethod
    def from_text(cls, text: str, name: str = "<pack>") -> "RulePack":
        return _parse_pack(text, name)

    @classmethod
    def from_file(cls, path: str | Path) -> "RulePack":
        path = Path(path)
        return _parse_pack(path.read_text(), path.stem)


_HEADER_RE = re.compile(
    r"^rule\s+(\w+)\s+(\w+)\s+tags\(([^()]*)\)\s*:", re.S)


def _parse_pack(text: str, pack_name: str) -> RulePack:
    body = "\n".join(line for line in text.splitlines()
                     if not line.lstrip().startswith("#"))
    chunks = re.split(r"(?m)^(?=rule\b)", body)
    rules: list[RewriteRule] = []
    for chunk in chunks:
        if not chunk.strip():
            continue
        rules.append(_parse_rule(chunk.strip(), pack_name))
    if not rules:
        raise RuleError(f"{pack_name}: no rules found")
    return RulePack(pack_name, tuple(rules))


def _parse_rule(chunk: str, pack_name: str) -> RewriteRule:
    m = _HEADER_RE.match(chunk)
    if m is None:
        raise RuleError(f"{pack_name}: bad rule header in {chunk.splitlines()[0]!r}")
    name, kind, tags_text = m.group(1), m.group(2), m.group(3)
    if kind not in ("expert", "buggy"):
        raise RuleError(f"{pack_name}: rule {name} has unknown kind {kind!r}")
    tags = frozenset(t.strip() for t in tags_text.split(",") if t.strip())
    rest = chunk[m.end():]
    if "~>" not in rest:
        raise RuleError(f"{pack_name}: rule {name} is missing '~>'")
    left, rebuild_src = rest.split("~>", 1)
    if "=>" not in left:
        raise RuleError(f"{pack_name}: rule {name} is missing '=>'")
    head_src, subtasks_src = left.split("=>", 1)
    guards: tuple[Guard, ...] = ()
    parts = re.split(r"\bwhere\b", head_src, maxsplit=1)
    pattern_src = parts[0]
    if len(parts) == 2:
        guards = _parse_guards(parts[1], name)
    try:
        pattern = flatten_ac(parse_term(pattern_src.strip(), patterns=True))
        subtasks = tuple(flatten_ac(parse_term(s.strip(), patterns=True))
                         for s in subtasks_src.split(";") if s.strip())
        rebuild = flatten_ac(
            parse_term(rebuild_src.strip(), patterns=True, refs=True))
    except TermError as exc:
        raise RuleError(f"{pack_name}: rule {name}: {exc}") from None
    rule = RewriteRule(name, kind, tags, pattern, guards, subtasks, rebuild)
    _validate_rule(rule, pack_name)
    return rule


def _parse_guards(src: str, rule_name: str) -> tuple[Guard, ...]:
    guards: list[Guard] = []
    rest = src.strip()
    while rest:
        m = re.match(r"(\w+)\s*\(([^()]*)\)\s*(?:,\s*|$)", rest)
        if m is None:
            raise RuleError(f"rule {rule_name}: bad guard near {rest!r}")
        gname = m.group(1)
        if gname not in _GUARD_NAMES:
            raise RuleError(f"rule {rule_name}: unknown guard {gname!r}")
        args = tuple(parse_term(a.strip(), patterns=True)
                     for a in m.group(2).split(",") if a.strip())
        if len(args) != _GUARD_NAMES[gname]:
            raise RuleError(
                f"rule {rule_name}: guard {gname} takes "
                f"{_GUARD_NAMES[gname]} argument(s), got {len(args)}")
        guards.append(Guard(gname, args))
        rest = rest[m.end():]
    return tuple(guards)


def _pattern_vars(t: Term) -> set[str]:
    if isinstance(t, (PVar, PSeg)):
        return {t.name}
    if isinstance(t, PHead):
        out = {t.head}
        for a in t.args:
            out |= _pattern_vars(a)
        return out
    if isinstance(t, App):
        out = set()
        for a in t.args:
            out |= _pattern_vars(a)
        return out
    return set()


def _check_segments(t: Term, where: str) -> None:
    if isinstance(t, App):
        segs = sum(isinstance(a, PSeg) for a in t.args)
        if segs and t.op not in AC_OPS:
            raise RuleError(f"{where}: segment variable under {t.op!r} "
                            "(only + and * take segments)")
        if segs > 1:
            raise RuleError(f"{where}: more than one segment under {t.op!r}")
        for a in t.args:
            if not isinstance(a, PSeg):
                _check_segments(a, where)
    elif isinstance(t, PHead):
        for a in t.args:
            _check_segments(a, where)
    elif isinstance(t, PSeg):
        raise RuleError(f"{where}: segment variable cannot stand alone")


def _max_subref(t: Term) -> int:
    if isinstance(t, SubRef):
        return t.index
    if isinstance(t, (App, PHead)):
        return max((_max_subref(a) for a in t.args), default=0)
    return 0


def _validate_rule(rule: RewriteRule, pack_name: str) -> None:
    where = f"{pack_name}: rule {rule.name}"
    _check_segments(rule.pattern, where)
    bound = _pattern_vars(rule.pattern)
    for g in rule.guards:
        for a in g.args:
            loose = _pattern_vars(a) - bound
            if loose:
                raise RuleError(f"{where}: guard uses unbound {sorted(loose)}")
    for label, tpl in (("subtask", rule.subtasks), ("rebuild", (rule.rebuild,))):
        for t in tpl:
            loose = _pattern_vars(t) - bound
            if loose:
                raise RuleError(
                    f"{where}: {label} uses unbound {sorted(loose)}")
    hi = _max_subref(rule.rebuild)
    if hi > len(rule.subtasks):
        raise RuleError(f"{where}: rebuild references #{hi} but only "
                        f"{len(rule.subtasks)} subtask(s) are declared")
    for t in rule.subtasks:
        if _max_subref(t) > 0:
            raise RuleError(f"{where}: subtasks cannot reference results")
