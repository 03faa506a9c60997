"""Tokenizer, recursive-descent parser, and name-binding check.

`parse_program` is total over str input: every failure is a `ParseError`
(or its subclass `UnboundName`) carrying a 1-based line/column.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    ArrayLit, Assign, Binary, Block, BoolLit, Expr, For, If, IncDec, Index,
    IntLit, Length, Pos, Print, Program, Stmt, Unary, Var, VarDecl, While,
)


class MiniLangError(Exception):
    pass


class ParseError(MiniLangError):
    def __init__(self, message: str, pos: Pos, expected: frozenset[str] = frozenset()):
        self.message = message
        self.pos = pos
        self.expected = expected
        line, col = pos
        super().__init__(f"{line}:{col}: {message}")


class UnboundName(ParseError):
    def __init__(self, name: str, pos: Pos, duplicate: bool = False):
        self.name = name
        self.duplicate = duplicate
        what = "duplicate declaration of" if duplicate else "unbound name"
        super().__init__(f"{what} '{name}'", pos)


KEYWORDS = {"int", "val", "if", "else", "while", "for", "true", "false"}

_TWO_CHAR = ("++", "--", "+=", "-=", "<=", ">=", "==", "!=", "&&", "||")
_ONE_CHAR = "+-*/%<>=!~(){}[];,."


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "string", "op", "eof"
    value: str
    pos: Pos


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start = (line, col)
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            toks.append(Token("int", source[i:j], start))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "ident", word, start))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    raise ParseError("unterminated string", start)
                buf.append(source[j])
                j += 1
            if j >= n:
                raise ParseError("unterminated string", start)
            toks.append(Token("string", "".join(buf), start))
            col += j + 1 - i
            i = j + 1
            continue
        two = source[i:i + 2]
        if two in _TWO_CHAR:
            toks.append(Token("op", two, start))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR:
            toks.append(Token("op", c, start))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", start)
    toks.append(Token("eof", "", (line, col)))
    return toks


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind == "op" and t.value in ops

    def at_kw(self, *kws: str) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.value in kws

    def expect_op(self, op: str) -> Token:
        t = self.peek()
        if not self.at_op(op):
            raise ParseError(f"expected {op!r}, found {t.value!r}", t.pos,
                             frozenset({op}))
        return self.next()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected identifier, found {t.value!r}", t.pos,
                             frozenset({"identifier"}))
        return self.next()

    # --- statements ---

    def program(self) -> Program:
        body = []
        while self.peek().kind != "eof":
            body.append(self.statement())
        return Program(tuple(body))

    def statement(self) -> Stmt:
        t = self.peek()
        if self.at_kw("int"):
            return self.var_decl()
        if self.at_kw("val"):
            return self.val_decl()
        if self.at_kw("if"):
            return self.if_stmt()
        if self.at_kw("while"):
            return self.while_stmt()
        if self.at_kw("for"):
            return self.for_stmt()
        if self.at_op("{"):
            return self.block()
        if t.kind == "ident" and t.value == "System":
            return self.print_stmt()
        if t.kind == "ident" and t.value == "print" and self.peek(1).kind == "op" \
                and self.peek(1).value == "(":
            return self.print_stmt()
        if self.at_op("++", "--"):
            op = self.next()
            name = self.expect_ident()
            self.expect_op(";")
            return IncDec(name.value, op.value, op.pos)
        if t.kind == "ident":
            s = self.simple_stmt()
            self.expect_op(";")
            return s
        raise ParseError(f"expected statement, found {t.value!r}", t.pos,
                         frozenset({"statement"}))

    def simple_stmt(self) -> Assign | IncDec:
        """Assignment or postfix ++/-- without the trailing semicolon."""
        name = self.expect_ident()
        if self.at_op("++", "--"):
            op = self.next()
            return IncDec(name.value, op.value, name.pos)
        t = self.peek()
        if self.at_op("=", "+=", "-="):
            self.next()
            value = self.expression()
            return Assign(name.value, t.value, value, name.pos)
        raise ParseError(f"expected assignment operator, found {t.value!r}",
                         t.pos, frozenset({"=", "+=", "-=", "++", "--"}))

    def var_decl(self, need_semi: bool = True) -> VarDecl:
        kw = self.next()  # "int"
        is_array = False
        if self.at_op("["):
            self.next()
            self.expect_op("]")
            is_array = True
        name = self.expect_ident()
        init: Expr | ArrayLit | None = None
        if self.at_op("="):
            self.next()
            if is_array:
                init = self.array_literal()
            else:
                init = self.expression()
        elif is_array:
            raise ParseError("array declaration requires an initializer",
                             name.pos)
        if need_semi:
            self.expect_op(";")
        return VarDecl(name.value, is_array, init, kw.pos)

    def val_decl(self) -> VarDecl:
        kw = self.next()  # "val"
        name = self.expect_ident()
        self.expect_op("=")
        init = self.expression()
        if self.at_op(";"):  # optional terminator in the val form
            self.next()
        return VarDecl(name.value, False, init, kw.pos)

    def array_literal(self) -> ArrayLit:
        brace = self.expect_op("{")
        items: list[Expr] = []
        if not self.at_op("}"):
            items.append(self.expression())
            while self.at_op(","):
                self.next()
                items.append(self.expression())
        self.expect_op("}")
        return ArrayLit(tuple(items), brace.pos)

    def if_stmt(self) -> If:
        kw = self.next()
        self.expect_op("(")
        cond = self.expression()
        self.expect_op(")")
        then = self.statement()
        orelse = None
        if self.at_kw("else"):
            self.next()
            orelse = self.statement()
        return If(cond, then, orelse, kw.pos)

    def while_stmt(self) -> While:
        kw = self.next()
        self.expect_op("(")
        cond = self.expression()
        self.expect_op(")")
        return While(cond, self.statement(), kw.pos)

    def for_stmt(self) -> For:
        kw = self.next()
        self.expect_op("(")
        init: VarDecl | Assign | None = None
        if not self.at_op(";"):
            if self.at_kw("int"):
                init = self.var_decl(need_semi=False)
            else:
                s = self.simple_stmt()
                if not isinstance(s, Assign):
                    raise ParseError("for-init must be a declaration or assignment",
                                     s.pos)
                init = s
        self.expect_op(";")
        cond = None if self.at_op(";") else self.expression()
        self.expect_op(";")
        step: Assign | IncDec | None = None
        if not self.at_op(")"):
            if self.at_op("++", "--"):
                op = self.next()
                name = self.expect_ident()
                step = IncDec(name.value, op.value, op.pos)
            else:
                step = self.simple_stmt()
        self.expect_op(")")
        return For(init, cond, step, self.statement(), kw.pos)

    def print_stmt(self) -> Print:
        head = self.next()  # "System" or "print"
        if head.value == "System":
            self.expect_op(".")
            t = self.expect_ident()
            if t.value != "out":
                raise ParseError("expected 'out'", t.pos)
            self.expect_op(".")
            t = self.expect_ident()
            if t.value != "print":
                raise ParseError("expected 'print'", t.pos)
        self.expect_op("(")
        value = self.expression(stop_before_string=True)
        sep = ""
        if self.at_op("+") and self.peek(1).kind == "string":
            self.next()
            sep = self.next().value
        self.expect_op(")")
        self.expect_op(";")
        return Print(value, sep, head.pos)

    def block(self) -> Block:
        brace = self.expect_op("{")
        body = []
        while not self.at_op("}"):
            if self.peek().kind == "eof":
                raise ParseError("unterminated block", brace.pos)
            body.append(self.statement())
        self.next()
        return Block(tuple(body), brace.pos)

    # --- expressions (precedence climbing) ---

    def expression(self, stop_before_string: bool = False) -> Expr:
        return self.or_expr(stop_before_string)

    def or_expr(self, sbs: bool = False) -> Expr:
        e = self.and_expr(sbs)
        while self.at_op("||"):
            op = self.next()
            e = Binary("||", e, self.and_expr(sbs), op.pos)
        return e

    def and_expr(self, sbs: bool) -> Expr:
        e = self.equality(sbs)
        while self.at_op("&&"):
            op = self.next()
            e = Binary("&&", e, self.equality(sbs), op.pos)
        return e

    def equality(self, sbs: bool) -> Expr:
        e = self.relational(sbs)
        while self.at_op("==", "!="):
            op = self.next()
            e = Binary(op.value, e, self.relational(sbs), op.pos)
        return e

    def relational(self, sbs: bool) -> Expr:
        e = self.additive(sbs)
        while self.at_op("<", "<=", ">", ">="):
            op = self.next()
            e = Binary(op.value, e, self.additive(sbs), op.pos)
        return e

    def additive(self, sbs: bool) -> Expr:
        e = self.multiplicative(sbs)
        while self.at_op("+", "-"):
            # inside print arguments, `+ "sep"` belongs to the caller
            if sbs and self.peek().value == "+" and self.peek(1).kind == "string":
                break
            op = self.next()
            e = Binary(op.value, e, self.multiplicative(sbs), op.pos)
        return e

    def multiplicative(self, sbs: bool) -> Expr:
        e = self.unary(sbs)
        while self.at_op("*", "/", "%"):
            op = self.next()
            e = Binary(op.value, e, self.unary(sbs), op.pos)
        return e

    def unary(self, sbs: bool) -> Expr:
        if self.at_op("-", "~", "!"):
            op = self.next()
            return Unary(op.value, self.unary(sbs), op.pos)
        return self.postfix(sbs)

    def postfix(self, sbs: bool) -> Expr:
        e = self.primary(sbs)
        while True:
            if self.at_op("["):
                br = self.next()
                idx = self.expression()
                self.expect_op("]")
                e = Index(e, idx, br.pos)
            elif self.at_op(".") and self.peek(1).kind == "ident" \
                    and self.peek(1).value == "length":
                dot = self.next()
                self.next()
                e = Length(e, dot.pos)
            else:
                return e

    def primary(self, sbs: bool) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return IntLit(int(t.value), t.pos)
        if self.at_kw("true", "false"):
            self.next()
            return BoolLit(t.value == "true", t.pos)
        if t.kind == "ident":
            self.next()
            return Var(t.value, t.pos)
        if self.at_op("("):
            self.next()
            e = self.expression(sbs)
            self.expect_op(")")
            return e
        raise ParseError(f"expected expression, found {t.value!r}", t.pos,
                         frozenset({"expression"}))


# --- binding check ---

class _Binder:
    def __init__(self) -> None:
        self.scopes: list[dict[str, bool]] = [{}]

    def declare(self, name: str, is_array: bool, pos: Pos) -> None:
        if name in self.scopes[-1]:
            raise UnboundName(name, pos, duplicate=True)
        self.scopes[-1][name] = is_array

    def lookup(self, name: str, pos: Pos) -> None:
        for scope in reversed(self.scopes):
            if name in scope:
                return
        raise UnboundName(name, pos)

    def stmt(self, s: Stmt) -> None:
        if isinstance(s, VarDecl):
            if isinstance(s.init, ArrayLit):
                for item in s.init.items:
                    self.expr(item)
            elif s.init is not None:
                self.expr(s.init)
            self.declare(s.name, s.is_array, s.pos)
        elif isinstance(s, Assign):
            self.lookup(s.name, s.pos)
            self.expr(s.value)
        elif isinstance(s, IncDec):
            self.lookup(s.name, s.pos)
        elif isinstance(s, If):
            self.expr(s.cond)
            self.in_scope(s.then)
            if s.orelse is not None:
                self.in_scope(s.orelse)
        elif isinstance(s, While):
            self.expr(s.cond)
            self.in_scope(s.body)
        elif isinstance(s, For):
            self.scopes.append({})
            try:
                if s.init is not None:
                    self.stmt(s.init)
                if s.cond is not None:
                    self.expr(s.cond)
                if s.step is not None:
                    self.stmt(s.step)
                self.in_scope(s.body)
            finally:
                self.scopes.pop()
        elif isinstance(s, Print):
            self.expr(s.value)
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

    def expr(self, e: Expr) -> None:
        if isinstance(e, Var):
            self.lookup(e.name, e.pos)
        elif isinstance(e, Index):
            self.expr(e.base)
            self.expr(e.index)
        elif isinstance(e, Length):
            self.expr(e.base)
        elif isinstance(e, Unary):
            self.expr(e.operand)
        elif isinstance(e, Binary):
            self.expr(e.left)
            self.expr(e.right)


def parse_program(source: str) -> Program:
    program = _Parser(tokenize(source)).program()
    binder = _Binder()
    for s in program.body:
        binder.stmt(s)
    return program
