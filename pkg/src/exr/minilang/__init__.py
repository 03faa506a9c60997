"""Small imperative language: Java-style statements plus an ML-style `val` form.

Programs are parsed with `parse_program`, run with `evaluate` (returns an
`Effect`) or `trace` (returns per-step environment snapshots).
"""

from .ast import (
    ArrayLit,
    Assign,
    Binary,
    Block,
    BoolLit,
    For,
    If,
    IncDec,
    Index,
    IntLit,
    Length,
    Print,
    Program,
    Unary,
    Var,
    VarDecl,
    While,
)
from .parser import MiniLangError, ParseError, UnboundName, parse_program
from .interp import INT_MAX, INT_MIN, Effect, TraceEntry, evaluate, trace

__all__ = [
    "ArrayLit", "Assign", "Binary", "Block", "BoolLit", "For", "If",
    "IncDec", "Index", "IntLit", "Length", "Print", "Program", "Unary",
    "Var", "VarDecl", "While",
    "MiniLangError", "ParseError", "UnboundName", "parse_program",
    "INT_MAX", "INT_MIN", "Effect", "TraceEntry", "evaluate", "trace",
]
