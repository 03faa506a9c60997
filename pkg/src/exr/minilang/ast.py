"""AST node types.

Positions are (line, column), 1-based.  They are excluded from equality so
that structurally identical programs compare equal regardless of layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Pos = tuple[int, int]


def _pos() -> Pos:
    return (0, 0)


# --- expressions ---

@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: "Expr"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Length:
    base: "Expr"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "-", "~" (synonym for "-"), "!"
    operand: "Expr"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / % < <= > >= == != && ||
    left: "Expr"
    right: "Expr"
    pos: Pos = field(default_factory=_pos, compare=False)


Expr = IntLit | BoolLit | Var | Index | Length | Unary | Binary


@dataclass(frozen=True)
class ArrayLit:
    items: tuple[Expr, ...]
    pos: Pos = field(default_factory=_pos, compare=False)


# --- statements ---

@dataclass(frozen=True)
class VarDecl:
    name: str
    is_array: bool
    init: Expr | ArrayLit | None
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Assign:
    name: str
    op: str  # "=", "+=", "-="
    value: Expr
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class IncDec:
    name: str
    op: str  # "++", "--"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    orelse: "Stmt | None"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Stmt"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class For:
    init: "VarDecl | Assign | None"
    cond: Expr | None
    step: "Assign | IncDec | None"
    body: "Stmt"
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Print:
    value: Expr
    sep: str  # appended after the printed value, may be ""
    pos: Pos = field(default_factory=_pos, compare=False)


@dataclass(frozen=True)
class Block:
    body: tuple["Stmt", ...]
    pos: Pos = field(default_factory=_pos, compare=False)


Stmt = VarDecl | Assign | IncDec | If | While | For | Print | Block


@dataclass(frozen=True)
class Program:
    body: tuple[Stmt, ...]
