"""Tree-walking evaluator with a fuel budget.

One unit of fuel is charged per executed atomic statement, per `if`
dispatch, and per loop-condition check; blocks are free.  A run that would
exceed its budget stops with status FuelExhausted and keeps the partial
stdout and bindings accumulated so far, so `steps <= fuel` always holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    ArrayLit, Assign, Binary, Block, BoolLit, Expr, For, If, IncDec, Index,
    IntLit, Length, Pos, Print, Program, Stmt, Unary, Var, VarDecl, While,
)

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1

Value = int | tuple[int, ...]

STATUS_COMPLETED = "Completed"
STATUS_FUEL = "FuelExhausted"


@dataclass(frozen=True)
class Effect:
    stdout: str
    bindings: dict[str, Value]
    steps: int
    status: str  # "Completed" | "FuelExhausted" | "RuntimeError(<kind>)"

    @property
    def ok(self) -> bool:
        return self.status == STATUS_COMPLETED

    def to_json(self) -> dict:
        return {
            "stdout": self.stdout,
            "bindings": {k: (list(v) if isinstance(v, tuple) else v)
                         for k, v in self.bindings.items()},
            "steps": self.steps,
            "status": self.status,
        }


@dataclass(frozen=True)
class TraceEntry:
    pos: Pos
    env: dict[str, Value] = field(compare=False)


class _Stop(Exception):
    """Internal: run ended early (fuel or runtime error)."""

    def __init__(self, status: str):
        self.status = status


class _RuntimeFault(Exception):
    def __init__(self, kind: str, pos: Pos):
        self.kind = kind
        self.pos = pos


def _check_int(v: int, pos: Pos) -> int:
    if v < INT_MIN or v > INT_MAX:
        raise _RuntimeFault("Overflow", pos)
    return v


class _Evaluator:
    def __init__(self, fuel: int, hook=None):
        self.fuel = fuel
        self.steps = 0
        self.stdout: list[str] = []
        self.scopes: list[dict[str, Value]] = [{}]
        self.hook = hook

    # fuel / tracing ---------------------------------------------------

    def charge(self) -> None:
        if self.steps >= self.fuel:
            raise _Stop(STATUS_FUEL)
        self.steps += 1

    def snapshot(self, pos: Pos) -> None:
        if self.hook is None:
            return
        env: dict[str, Value] = {}
        for scope in self.scopes:
            env.update(scope)
        self.hook(TraceEntry(pos, env))

    # environment ------------------------------------------------------

    def declare(self, name: str, value: Value) -> None:
        self.scopes[-1][name] = value

    def load(self, name: str, pos: Pos) -> Value:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise _RuntimeFault("UnboundName", pos)  # unreachable after binding check

    def store(self, name: str, value: Value, pos: Pos) -> None:
        for scope in reversed(self.scopes):
            if name in scope:
                scope[name] = value
                return
        raise _RuntimeFault("UnboundName", pos)

    # expressions ------------------------------------------------------

    def as_int(self, e: Expr) -> int:
        v = self.expr(e)
        if not isinstance(v, int) or isinstance(v, bool):
            raise _RuntimeFault("TypeMismatch", e.pos)
        return v

    def as_bool(self, e: Expr) -> bool:
        v = self.expr(e)
        if not isinstance(v, bool):
            raise _RuntimeFault("TypeMismatch", e.pos)
        return v

    def expr(self, e: Expr):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, Var):
            return self.load(e.name, e.pos)
        if isinstance(e, Index):
            base = self.expr(e.base)
            if not isinstance(base, tuple):
                raise _RuntimeFault("TypeMismatch", e.pos)
            idx = self.as_int(e.index)
            if idx < 0 or idx >= len(base):
                raise _RuntimeFault("IndexOutOfBounds", e.pos)
            return base[idx]
        if isinstance(e, Length):
            base = self.expr(e.base)
            if not isinstance(base, tuple):
                raise _RuntimeFault("TypeMismatch", e.pos)
            return len(base)
        if isinstance(e, Unary):
            if e.op == "!":
                return not self.as_bool(e.operand)
            return _check_int(-self.as_int(e.operand), e.pos)  # "-" and "~"
        if isinstance(e, Binary):
            if e.op == "&&":
                return self.as_bool(e.left) and self.as_bool(e.right)
            if e.op == "||":
                return self.as_bool(e.left) or self.as_bool(e.right)
            a = self.as_int(e.left)
            b = self.as_int(e.right)
            if e.op == "+":
                return _check_int(a + b, e.pos)
            if e.op == "-":
                return _check_int(a - b, e.pos)
            if e.op == "*":
                return _check_int(a * b, e.pos)
            if e.op == "/":
                if b == 0:
                    raise _RuntimeFault("DivisionByZero", e.pos)
                # truncate toward zero, like Java
                q = abs(a) // abs(b)
                return _check_int(q if (a < 0) == (b < 0) else -q, e.pos)
            if e.op == "%":
                if b == 0:
                    raise _RuntimeFault("DivisionByZero", e.pos)
                q = abs(a) // abs(b)
                q = q if (a < 0) == (b < 0) else -q
                return _check_int(a - q * b, e.pos)
            if e.op == "<":
                return a < b
            if e.op == "<=":
                return a <= b
            if e.op == ">":
                return a > b
            if e.op == ">=":
                return a >= b
            if e.op == "==":
                return a == b
            if e.op == "!=":
                return a != b
        raise _RuntimeFault("TypeMismatch", e.pos)

    # statements -------------------------------------------------------

    def stmt(self, s: Stmt) -> None:
        if isinstance(s, VarDecl):
            self.charge()
            if isinstance(s.init, ArrayLit):
                value: Value = tuple(self.as_int(item) for item in s.init.items)
            elif s.init is None:
                value = 0
            else:
                value = self.as_int(s.init)
            self.declare(s.name, value)
            self.snapshot(s.pos)
        elif isinstance(s, Assign):
            self.charge()
            rhs = self.as_int(s.value)
            if s.op == "=":
                self.store(s.name, rhs, s.pos)
            else:
                cur = self.load(s.name, s.pos)
                if not isinstance(cur, int) or isinstance(cur, bool):
                    raise _RuntimeFault("TypeMismatch", s.pos)
                nxt = cur + rhs if s.op == "+=" else cur - rhs
                self.store(s.name, _check_int(nxt, s.pos), s.pos)
            self.snapshot(s.pos)
        elif isinstance(s, IncDec):
            self.charge()
            cur = self.load(s.name, s.pos)
            if not isinstance(cur, int) or isinstance(cur, bool):
                raise _RuntimeFault("TypeMismatch", s.pos)
            delta = 1 if s.op == "++" else -1
            self.store(s.name, _check_int(cur + delta, s.pos), s.pos)
            self.snapshot(s.pos)
        elif isinstance(s, If):
            self.charge()
            taken = self.as_bool(s.cond)
            self.snapshot(s.pos)
            if taken:
                self.in_scope(s.then)
            elif s.orelse is not None:
                self.in_scope(s.orelse)
        elif isinstance(s, While):
            while True:
                self.charge()
                taken = self.as_bool(s.cond)
                self.snapshot(s.pos)
                if not taken:
                    return
                self.in_scope(s.body)
        elif isinstance(s, For):
            self.scopes.append({})
            try:
                if s.init is not None:
                    self.stmt(s.init)
                while True:
                    self.charge()
                    taken = True if s.cond is None else self.as_bool(s.cond)
                    self.snapshot(s.pos)
                    if not taken:
                        return
                    self.in_scope(s.body)
                    if s.step is not None:
                        self.stmt(s.step)
            finally:
                self.scopes.pop()
        elif isinstance(s, Print):
            self.charge()
            v = self.as_int(s.value)
            self.stdout.append(str(v) + s.sep)
            self.snapshot(s.pos)
        elif isinstance(s, Block):
            self.scopes.append({})
            try:
                for inner in s.body:
                    self.stmt(inner)
            finally:
                self.scopes.pop()

    def in_scope(self, s: Stmt) -> None:
        self.scopes.append({})
        try:
            self.stmt(s)
        finally:
            self.scopes.pop()

    def run(self, program: Program) -> Effect:
        status = STATUS_COMPLETED
        try:
            for s in program.body:
                self.stmt(s)
        except _Stop as stop:
            status = stop.status
        except _RuntimeFault as fault:
            status = f"RuntimeError({fault.kind})"
        return Effect("".join(self.stdout), dict(self.scopes[0]),
                      self.steps, status)


def evaluate(program: Program, fuel: int = 10_000) -> Effect:
    """Run `program` under a fuel budget and report its observable effect.

    The returned bindings are the program's top-level variables in
    declaration order.  Deterministic: equal programs and fuel yield equal
    effects.
    """
    return _Evaluator(fuel).run(program)


def trace(program: Program, fuel: int = 10_000) -> list[TraceEntry]:
    """Run `program` and capture an environment snapshot after every step.

    Snapshots show all live variables (inner scopes shadow outer).  The
    final snapshot of a completed run equals `evaluate(...).bindings`.
    """
    entries: list[TraceEntry] = []
    _Evaluator(fuel, hook=entries.append).run(program)
    return entries
