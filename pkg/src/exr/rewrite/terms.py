"""Term representation, canonical form, parsing, printing, evaluation.

Operators with special meaning:

- ``+`` and ``*`` are flattened, constant-folded, and argument-sorted by
  `normalize`; ``-`` and unary negation are eliminated in favor of
  ``(-1) * t`` summands.
- ``d`` (two arguments: variable, body) is a derivative task, written
  ``d/dx[body]``.
- ``at(body, var, value)`` is deferred substitution: it resolves to
  ``body[var := value]`` as soon as the body is free of ``d``.
- ``eq(lhs, rhs)`` is an equation; its arguments keep their order.

Pattern-only nodes (`PVar` ``?x``, segment `PSeg` ``?*xs``, head-variable
`PHead` ``?f(...)``, and `SubRef` ``#1`` in rebuild templates) parse only
when requested.  `normalize` is idempotent and deterministic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction


class TermError(Exception):
    pass


class TermEvalError(TermError):
    """Numeric evaluation hit a domain error or an unresolved operator."""


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class App:
    op: str
    args: tuple["Term", ...]


@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PSeg:
    name: str


@dataclass(frozen=True)
class PHead:
    head: str
    args: tuple["Term", ...]


@dataclass(frozen=True)
class SubRef:
    index: int  # 1-based


Term = Const | Sym | App | PVar | PSeg | PHead | SubRef

# Ops with algebraic meaning; head variables never match these.
CORE_OPS = frozenset({"+", "-", "*", "/", "^", "neg", "d", "at", "eq"})
AC_OPS = frozenset({"+", "*"})


def term_key(t: Term):
    """Total order over terms: constants, symbols, applications, patterns."""
    if isinstance(t, Const):
        return (0, t.value)
    if isinstance(t, Sym):
        return (1, t.name)
    if isinstance(t, App):
        return (2, t.op, len(t.args), tuple(term_key(a) for a in t.args))
    if isinstance(t, PVar):
        return (3, t.name)
    if isinstance(t, PSeg):
        return (4, t.name)
    if isinstance(t, PHead):
        return (5, t.head, tuple(term_key(a) for a in t.args))
    return (6, t.index)


def contains_op(t: Term, op: str) -> bool:
    if isinstance(t, App):
        return t.op == op or any(contains_op(a, op) for a in t.args)
    if isinstance(t, PHead):
        return any(contains_op(a, op) for a in t.args)
    return False


def flatten_ac(t: Term) -> Term:
    """Merge nested ``+`` under ``+`` and ``*`` under ``*`` without
    folding, sorting, or touching anything else.  Rule templates are
    flattened so segment variables sit directly under their operator."""
    if isinstance(t, App):
        args = tuple(flatten_ac(a) for a in t.args)
        if t.op in AC_OPS:
            flat: list[Term] = []
            for a in args:
                if isinstance(a, App) and a.op == t.op:
                    flat.extend(a.args)
                else:
                    flat.append(a)
            return App(t.op, tuple(flat))
        return App(t.op, args)
    if isinstance(t, PHead):
        return PHead(t.head, tuple(flatten_ac(a) for a in t.args))
    return t


def substitute(t: Term, name: str, value: Term) -> Term:
    if isinstance(t, Sym):
        return value if t.name == name else t
    if isinstance(t, App):
        return App(t.op, tuple(substitute(a, name, value) for a in t.args))
    if isinstance(t, PHead):
        return PHead(t.head, tuple(substitute(a, name, value) for a in t.args))
    return t


def normalize(t: Term) -> Term:
    """Canonical form: idempotent, deterministic, total."""
    if isinstance(t, (Sym, PVar, PSeg, SubRef, Const)):
        return t
    if isinstance(t, PHead):
        return PHead(t.head, tuple(normalize(a) for a in t.args))
    args = [normalize(a) for a in t.args]
    op = t.op
    if op == "neg":
        return _norm_app("*", [Const(Fraction(-1)), args[0]])
    if op == "-":
        minus = _norm_app("*", [Const(Fraction(-1)), args[1]])
        return _norm_app("+", [args[0], minus])
    return _norm_app(op, args)


def _norm_app(op: str, args: list[Term]) -> Term:
    if op in AC_OPS:
        return _fold_ac(op, args)
    if op == "^":
        base, exp = args
        if isinstance(base, Const) and isinstance(exp, Const) \
                and exp.value.denominator == 1:
            if base.value != 0 or exp.value >= 0:
                return Const(base.value ** int(exp.value))
        if isinstance(exp, Const):
            if exp.value == 1:
                return base
            if exp.value == 0:
                return Const(Fraction(1))
        if isinstance(base, Const) and base.value == 1:
            return Const(Fraction(1))
        return App("^", (base, exp))
    if op == "/":
        num, den = args
        if isinstance(den, Const) and den.value != 0:
            if isinstance(num, Const):
                return Const(num.value / den.value)
            if den.value == 1:
                return num
        return App("/", (num, den))
    if op == "at":
        body, var, value = args
        if isinstance(var, Sym) and not contains_op(body, "d"):
            return normalize(substitute(body, var.name, value))
        return App("at", (body, var, value))
    return App(op, tuple(args))


def _fold_ac(op: str, args: list[Term]) -> Term:
    identity = Fraction(0) if op == "+" else Fraction(1)
    const = identity
    items: list[Term] = []
    stack = list(args)
    while stack:
        a = stack.pop()
        if isinstance(a, App) and a.op == op:
            stack.extend(a.args)
        elif isinstance(a, Const):
            const = const + a.value if op == "+" else const * a.value
        else:
            items.append(a)
    if op == "*" and const == 0:
        return Const(Fraction(0))
    items.sort(key=term_key)
    if const != identity:
        items.insert(0, Const(const))
    if not items:
        return Const(identity)
    if len(items) == 1:
        return items[0]
    return App(op, tuple(items))


# --- numeric evaluation ---------------------------------------------------

def term_eval(t: Term, env: dict[str, float]) -> float:
    """Evaluate a (pattern-free) term to a float.

    Raises TermEvalError on unknown symbols, domain errors, and operators
    with no numeric meaning (`d`, `eq`, unresolved `at`).
    """
    t = normalize(t)
    return _num(t, env)


def _num(t: Term, env: dict[str, float]) -> float:
    if isinstance(t, Const):
        return float(t.value)
    if isinstance(t, Sym):
        try:
            return env[t.name]
        except KeyError:
            raise TermEvalError(f"unbound symbol {t.name!r}") from None
    if not isinstance(t, App):
        raise TermEvalError(f"cannot evaluate pattern node {t!r}")
    op = t.op
    if op == "+":
        return math.fsum(_num(a, env) for a in t.args)
    if op == "*":
        out = 1.0
        for a in t.args:
            out *= _num(a, env)
        return out
    if op == "-":
        return _num(t.args[0], env) - _num(t.args[1], env)
    if op == "neg":
        return -_num(t.args[0], env)
    if op == "/":
        den = _num(t.args[1], env)
        if den == 0:
            raise TermEvalError("division by zero")
        return _num(t.args[0], env) / den
    if op == "^":
        base = _num(t.args[0], env)
        exp = _num(t.args[1], env)
        if base == 0 and exp < 0:
            raise TermEvalError("zero to a negative power")
        if base < 0 and exp != int(exp):
            raise TermEvalError("negative base, fractional exponent")
        try:
            return base ** exp
        except OverflowError:
            raise TermEvalError("overflow") from None
    if op == "log":
        x = _num(t.args[0], env)
        if x <= 0:
            raise TermEvalError("log of a non-positive value")
        return math.log(x)
    if op == "sin":
        return math.sin(_num(t.args[0], env))
    if op == "cos":
        return math.cos(_num(t.args[0], env))
    if op == "at":
        body, var, value = t.args
        if not isinstance(var, Sym):
            raise TermEvalError("unresolved substitution")
        return _num(substitute(body, var.name, value), env)
    raise TermEvalError(f"operator {op!r} has no numeric meaning")


# --- parsing ----------------------------------------------------------------

_DIFF_RE = re.compile(r"d/d(\?)?([A-Za-z_]\w*)")
_NAME_RE = re.compile(r"[A-Za-z_]\w*")
_NUM_RE = re.compile(r"\d+")


class _TermParser:
    def __init__(self, src: str, patterns: bool, refs: bool):
        self.src = src
        self.i = 0
        self.patterns = patterns
        self.refs = refs

    def error(self, msg: str) -> TermError:
        return TermError(f"{msg} (near position {self.i} in {self.src!r})")

    def ws(self) -> None:
        while self.i < len(self.src) and self.src[self.i] in " \t\r\n":
            self.i += 1

    def peek(self) -> str:
        self.ws()
        return self.src[self.i] if self.i < len(self.src) else ""

    def parse(self) -> Term:
        t = self.add()
        self.ws()
        if self.i < len(self.src):
            raise self.error(f"trailing input {self.src[self.i:]!r}")
        return t

    def add(self) -> Term:
        t = self.mul()
        while True:
            c = self.peek()
            if c == "+":
                self.i += 1
                t = App("+", (t, self.mul()))
            elif c == "-":
                self.i += 1
                t = App("-", (t, self.mul()))
            else:
                return t

    def mul(self) -> Term:
        t = self.unary()
        while True:
            c = self.peek()
            if c == "*":
                self.i += 1
                t = App("*", (t, self.unary()))
            elif c == "/":
                self.i += 1
                t = App("/", (t, self.unary()))
            else:
                return t

    def unary(self) -> Term:
        if self.peek() == "-":
            self.i += 1
            return App("neg", (self.unary(),))
        return self.power()

    def power(self) -> Term:
        base = self.primary()
        if self.peek() == "^":
            self.i += 1
            return App("^", (base, self.unary()))
        return base

    def args(self) -> tuple[Term, ...]:
        assert self.peek() == "("
        self.i += 1
        if self.peek() == ")":
            self.i += 1
            return ()
        out = [self.add()]
        while self.peek() == ",":
            self.i += 1
            out.append(self.add())
        if self.peek() != ")":
            raise self.error("expected ')'")
        self.i += 1
        return tuple(out)

    def primary(self) -> Term:
        self.ws()
        c = self.peek()
        if c == "(":
            self.i += 1
            t = self.add()
            if self.peek() != ")":
                raise self.error("expected ')'")
            self.i += 1
            return t
        if c == "#":
            if not self.refs:
                raise self.error("subtask references not allowed here")
            self.i += 1
            m = _NUM_RE.match(self.src, self.i)
            if m is None:
                raise self.error("expected digits after '#'")
            self.i = m.end()
            return SubRef(int(m.group()))
        if c == "?":
            if not self.patterns:
                raise self.error("pattern variables not allowed here")
            self.i += 1
            if self.peek() == "*":
                self.i += 1
                m = _NAME_RE.match(self.src, self.i)
                if m is None:
                    raise self.error("expected name after '?*'")
                self.i = m.end()
                return PSeg(m.group())
            m = _NAME_RE.match(self.src, self.i)
            if m is None:
                raise self.error("expected name after '?'")
            self.i = m.end()
            name = m.group()
            if self.peek() == "(":
                return self.maybe_implicit(PHead(name, self.args()))
            return self.maybe_implicit(PVar(name))
        if self.src.startswith("d/d", self.i):
            m = _DIFF_RE.match(self.src, self.i)
            if m is None:
                raise self.error("malformed derivative")
            self.i = m.end()
            var: Term = PVar(m.group(2)) if m.group(1) else Sym(m.group(2))
            if isinstance(var, PVar) and not self.patterns:
                raise self.error("pattern variables not allowed here")
            if self.peek() != "[":
                raise self.error("expected '[' after derivative")
            self.i += 1
            body = self.add()
            if self.peek() != "]":
                raise self.error("expected ']'")
            self.i += 1
            return App("d", (var, body))
        m = _NUM_RE.match(self.src, self.i)
        if m is not None and m.start() == self.i:
            self.i = m.end()
            return self.maybe_implicit(Const(Fraction(int(m.group()))))
        m = _NAME_RE.match(self.src, self.i)
        if m is not None and m.start() == self.i:
            self.i = m.end()
            name = m.group()
            if self.peek() == "(":
                return App(name, self.args())
            return Sym(name)
        raise self.error("expected a term")

    def maybe_implicit(self, t: Term) -> Term:
        """Implicit multiplication: `2x`, `3sin(x)`, `2(x+1)`."""
        if not isinstance(t, Const):
            return t
        self.ws()
        if self.i < len(self.src) and (self.src[self.i].isalpha()
                                       or self.src[self.i] in "(?"):
            if self.src.startswith("?*", self.i) and not self.patterns:
                return t
            return App("*", (t, self.power()))
        return t


def parse_term(src: str, patterns: bool = False, refs: bool = False) -> Term:
    """Parse a term.  `patterns` enables `?x`/`?*xs`/`?f(...)`; `refs`
    enables `#n` subtask references (rebuild templates)."""
    return _TermParser(src, patterns, refs).parse()


# --- printing ----------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(t: Term) -> int:
    if isinstance(t, App):
        if t.op in ("+", "-"):
            return _PREC_ADD
        if t.op in ("*", "/"):
            return _PREC_MUL
        if t.op == "neg":
            return _PREC_UNARY
        if t.op == "^":
            return _PREC_POW
    return _PREC_ATOM


def _wrap(t: Term, minimum: int) -> str:
    s = format_term(t)
    return f"({s})" if _prec(t) < minimum else s


def _negated_view(t: Term) -> Term | None:
    """If `t` renders naturally as a subtraction operand, return its
    positive counterpart."""
    if isinstance(t, Const) and t.value < 0:
        return Const(-t.value)
    if isinstance(t, App) and t.op == "*" and t.args \
            and isinstance(t.args[0], Const) and t.args[0].value < 0:
        head = Const(-t.args[0].value)
        rest = (head,) + t.args[1:] if head.value != 1 else t.args[1:]
        if not rest:
            return Const(Fraction(1))
        return rest[0] if len(rest) == 1 else App("*", rest)
    return None


def format_term(t: Term) -> str:
    if isinstance(t, Const):
        return str(t.value)
    if isinstance(t, Sym):
        return t.name
    if isinstance(t, PVar):
        return f"?{t.name}"
    if isinstance(t, PSeg):
        return f"?*{t.name}"
    if isinstance(t, SubRef):
        return f"#{t.index}"
    if isinstance(t, PHead):
        return f"?{t.head}(" + ", ".join(format_term(a) for a in t.args) + ")"
    op = t.op
    if op == "+":
        out = _wrap(t.args[0], _PREC_ADD)
        for a in t.args[1:]:
            pos = _negated_view(a)
            if pos is not None:
                out += " - " + _wrap(pos, _PREC_MUL)
            else:
                out += " + " + _wrap(a, _PREC_MUL)
        return out
    if op == "-":
        return f"{_wrap(t.args[0], _PREC_ADD)} - {_wrap(t.args[1], _PREC_MUL)}"
    if op == "*":
        args = t.args
        prefix = ""
        # A leading -1 prints as a sign unless the next factor is a
        # division, where "-a/b" would reparse with the sign inside the
        # numerator and change the structure.
        if args and isinstance(args[0], Const) and args[0].value == -1 \
                and len(args) > 1 \
                and not (isinstance(args[1], App) and args[1].op == "/"):
            prefix = "-"
            args = args[1:]
        body = "*".join(_wrap(a, _PREC_MUL if j == 0 else _PREC_MUL + 1)
                        for j, a in enumerate(args))
        return prefix + body if len(args) > 1 or prefix else format_term(args[0])
    if op == "/":
        return f"{_wrap(t.args[0], _PREC_MUL)}/{_wrap(t.args[1], _PREC_UNARY)}"
    if op == "neg":
        return f"-{_wrap(t.args[0], _PREC_UNARY)}"
    if op == "^":
        return f"{_wrap(t.args[0], _PREC_ATOM)}^{_wrap(t.args[1], _PREC_ATOM)}"
    if op == "d":
        var, body = t.args
        return f"d/d{format_term(var)}[{format_term(body)}]"
    return f"{op}(" + ", ".join(format_term(a) for a in t.args) + ")"
