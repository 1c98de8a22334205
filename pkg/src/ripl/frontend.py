"""Lexer, parser and static well-formedness checks for RIPL source.

Concrete syntax::

    program  ::= input+ binding* output+
    input    ::= "in" IDENT ":" "image" "<" INT "," INT ">" ";"
    binding  ::= "let" IDENT "=" skel ";"
    output   ::= "out" IDENT ";"
    skel     ::= IDENT "(" actual { "," actual } ")"
    actual   ::= IDENT | INT | "(" INT "," INT ")" | kernel | "append"
    kernel   ::= "\\" IDENT+ "->" expr

    expr     ::= "let" IDENT "=" expr "in" expr
               | "if" expr "then" expr "else" expr
               | or
    or       ::= and { "||" and }
    and      ::= cmp { "&&" cmp }
    cmp      ::= add [ ("<"|"<="|">"|">="|"=="|"!=") add ]
    add      ::= mul { ("+"|"-") mul }
    mul      ::= unary { ("*"|"/"|"%") unary }
    unary    ::= ("-"|"!") unary | postfix
    postfix  ::= primary { "[" expr "]" }
    primary  ::= INT | IDENT | IDENT "(" expr { "," expr } ")"
               | "[" expr { "," expr } "]" | "(" expr ")"

``//`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    BUILTINS, SKELETONS, Actual, AppendArg, Binding, BinOp, Call, Expr, If, Index,
    InputDecl, IntArg, IntLit, Kernel, Let, NameArg, OutputDecl, PairArg, Pos, Program,
    SkeletonApp, UnOp, Var, VecLit,
)
from .errors import CompileError, Diagnostic

KEYWORDS = {"in", "out", "let", "image", "if", "then", "else", "append"}
INT64_MAX = 2**63 - 1

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|<=|>=|==|!=|&&|\|\||[-+*/%<>=!()\[\],;:\\])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "op", "eof"
    text: str
    pos: Pos

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else f"'{self.text}'"


def _syntax(pos: Pos, message: str) -> CompileError:
    return CompileError(Diagnostic("E_SYNTAX", pos[0], pos[1], message))


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, i = 1, 0, 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise _syntax((line, i - line_start + 1), f"unexpected character {source[i]!r}")
        kind = m.lastgroup
        text = m.group()
        pos = (line, i - line_start + 1)
        if kind == "ws":
            nl = text.count("\n")
            if nl:
                line += nl
                line_start = i + text.rindex("\n") + 1
        elif kind == "ident" and text in KEYWORDS:
            tokens.append(Token("kw", text, pos))
        else:
            tokens.append(Token(kind, text, pos))
        i = m.end()
    tokens.append(Token("eof", "", (line, i - line_start + 1)))
    return tokens


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise _syntax(self.tok.pos, f"expected '{text}' but found {self.tok.describe()}")
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            raise _syntax(self.tok.pos, f"expected identifier but found {self.tok.describe()}")
        return self.advance()

    def expect_int(self) -> int:
        if self.tok.kind != "int":
            raise _syntax(self.tok.pos, f"expected integer but found {self.tok.describe()}")
        t = self.advance()
        value = int(t.text)
        if value > INT64_MAX:
            raise _syntax(t.pos, f"integer literal {t.text} exceeds 64-bit range")
        return value

    # -- program level

    def program(self) -> Program:
        inputs, bindings, outputs = [], [], []
        if not self.at("in"):
            raise _syntax(self.tok.pos, f"expected 'in' but found {self.tok.describe()}")
        while self.at("in"):
            inputs.append(self.input_decl())
        while self.at("let"):
            bindings.append(self.binding())
        if not self.at("out"):
            what = "'let' or 'out'" if not inputs or not outputs else "'out'"
            raise _syntax(self.tok.pos, f"expected {what} but found {self.tok.describe()}")
        while self.at("out"):
            start = self.advance().pos
            name = self.expect_ident()
            self.expect(";")
            outputs.append(OutputDecl(name.text, start))
        if self.tok.kind != "eof":
            raise _syntax(self.tok.pos, f"expected 'out' or end of input but found {self.tok.describe()}")
        return Program(tuple(inputs), tuple(bindings), tuple(outputs))

    def input_decl(self) -> InputDecl:
        start = self.expect("in").pos
        name = self.expect_ident()
        self.expect(":")
        self.expect("image")
        self.expect("<")
        width = self.expect_int()
        self.expect(",")
        height = self.expect_int()
        self.expect(">")
        self.expect(";")
        return InputDecl(name.text, width, height, start)

    def binding(self) -> Binding:
        start = self.expect("let").pos
        name = self.expect_ident()
        self.expect("=")
        skel = self.expect_ident()
        self.expect("(")
        args = [self.actual()]
        while self.at(","):
            self.advance()
            args.append(self.actual())
        self.expect(")")
        self.expect(";")
        return Binding(name.text, SkeletonApp(skel.text, tuple(args), skel.pos), start)

    def actual(self) -> Actual:
        t = self.tok
        if t.kind == "ident":
            self.advance()
            return NameArg(t.text, t.pos)
        if t.kind == "int":
            return IntArg(self.expect_int(), t.pos)
        if self.at("append"):
            self.advance()
            return AppendArg(t.pos)
        if self.at("("):
            self.advance()
            first = self.expect_int()
            self.expect(",")
            second = self.expect_int()
            self.expect(")")
            return PairArg(first, second, t.pos)
        if self.at("\\"):
            return self.kernel()
        raise _syntax(t.pos, f"expected skeleton argument but found {t.describe()}")

    def kernel(self) -> Kernel:
        start = self.expect("\\").pos
        params = [self.expect_ident().text]
        while self.tok.kind == "ident":
            params.append(self.advance().text)
        self.expect("->")
        return Kernel(tuple(params), self.expr(), start)

    # -- expressions

    def expr(self) -> Expr:
        t = self.tok
        if self.at("let"):
            self.advance()
            name = self.expect_ident().text
            self.expect("=")
            value = self.expr()
            self.expect("in")
            return Let(name, value, self.expr(), t.pos)
        if self.at("if"):
            self.advance()
            cond = self.expr()
            self.expect("then")
            then = self.expr()
            self.expect("else")
            return If(cond, then, self.expr(), t.pos)
        return self.binary(1)

    _LEVELS = {
        1: ("||",), 2: ("&&",), 3: ("<", "<=", ">", ">=", "==", "!="),
        4: ("+", "-"), 5: ("*", "/", "%"),
    }

    def binary(self, level: int) -> Expr:
        if level > 5:
            return self.unary()
        left = self.binary(level + 1)
        ops = self._LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.advance()
            right = self.binary(level + 1)
            left = BinOp(op.text, left, right, op.pos)
            if level == 3:
                if self.tok.kind == "op" and self.tok.text in ops:
                    raise _syntax(self.tok.pos, "comparison operators do not chain")
                break
        return left

    def unary(self) -> Expr:
        if self.at("-") or self.at("!"):
            op = self.advance()
            return UnOp(op.text, self.unary(), op.pos)
        e = self.primary()
        while self.at("["):
            t = self.advance()
            idx = self.expr()
            self.expect("]")
            e = Index(e, idx, t.pos)
        return e

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            return IntLit(self.expect_int(), t.pos)
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = [self.expr()]
                while self.at(","):
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                return Call(t.text, tuple(args), t.pos)
            return Var(t.text, t.pos)
        if self.at("["):
            self.advance()
            items = [self.expr()]
            while self.at(","):
                self.advance()
                items.append(self.expr())
            self.expect("]")
            return VecLit(tuple(items), t.pos)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise _syntax(t.pos, f"expected expression but found {t.describe()}")


def parse(source: str) -> Program:
    """Parse RIPL source text. Raises CompileError(E_SYNTAX) on failure."""
    return Parser(source).program()


def parse_kernel(text: str) -> Kernel:
    p = Parser(text)
    k = p.kernel()
    if p.tok.kind != "eof":
        raise _syntax(p.tok.pos, f"unexpected {p.tok.describe()} after kernel")
    return k


# ---------------------------------------------------------------- static checks

# Argument shapes per skeleton: "img", "int", "pair", "kernel", "kfun" (kernel or append).
SHAPES: dict[str, list[tuple[str, ...]]] = {
    "mapRow": [("img", "int", "kernel")],
    "mapCol": [("img", "int", "kernel")],
    "concatMapRow": [("img", "int", "int", "kernel")],
    "concatMapCol": [("img", "int", "int", "kernel")],
    "zipWithRow": [("img", "img", "kernel")],
    "zipWithCol": [("img", "img", "kernel")],
    "combineRow": [("img", "img", "int", "int", "kfun"), ("img", "img", "int", "append")],
    "combineCol": [("img", "img", "int", "int", "kfun"), ("img", "img", "int", "append")],
    "convolve": [("img", "pair", "kernel")],
    "foldVector": [("img", "int", "int", "kernel")],
    "foldScalar": [("img", "int", "kernel")],
}

_SIGNATURES = {
    "mapRow": "mapRow(im, A, kernel)", "mapCol": "mapCol(im, A, kernel)",
    "concatMapRow": "concatMapRow(im, A, B, kernel)", "concatMapCol": "concatMapCol(im, A, B, kernel)",
    "zipWithRow": "zipWithRow(im1, im2, kernel)", "zipWithCol": "zipWithCol(im1, im2, kernel)",
    "combineRow": "combineRow(im1, im2, A, B, kernel|append)",
    "combineCol": "combineCol(im1, im2, A, B, kernel|append)",
    "convolve": "convolve(im, (a, b), kernel)", "foldVector": "foldVector(im, init, s, kernel)",
    "foldScalar": "foldScalar(im, init, kernel)",
}


def _matches(arg: Actual, shape: str) -> bool:
    if shape == "img":
        return isinstance(arg, NameArg)
    if shape == "int":
        return isinstance(arg, IntArg)
    if shape == "pair":
        return isinstance(arg, PairArg)
    if shape == "kernel":
        return isinstance(arg, Kernel)
    if shape == "append":
        return isinstance(arg, AppendArg)
    return isinstance(arg, (Kernel, AppendArg))


def _diag(code: str, pos: Pos, message: str) -> Diagnostic:
    return Diagnostic(code, pos[0], pos[1], message)


def _check_kernel(k: Kernel, errors: list[Diagnostic]) -> None:
    seen: set[str] = set()
    for name in k.params:
        if name in seen:
            errors.append(_diag("E_REBIND", k.pos, f"kernel parameter '{name}' bound twice"))
        seen.add(name)

    def walk(e: Expr, scope: frozenset[str]) -> None:
        if isinstance(e, Var):
            if e.name not in scope:
                errors.append(_diag("E_UNBOUND", e.pos, f"'{e.name}' is not a kernel parameter or local"))
        elif isinstance(e, Let):
            walk(e.value, scope)
            if e.name in scope:
                errors.append(_diag("E_REBIND", e.pos, f"'{e.name}' bound twice in kernel"))
            walk(e.body, scope | {e.name})
        elif isinstance(e, Call):
            if e.func not in BUILTINS:
                errors.append(_diag("E_UNBOUND", e.pos, f"unknown builtin '{e.func}'"))
            elif len(e.args) != BUILTINS[e.func]:
                errors.append(_diag(
                    "E_ARITY", e.pos,
                    f"builtin '{e.func}' takes {BUILTINS[e.func]} arguments, got {len(e.args)}"))
            for a in e.args:
                walk(a, scope)
        elif isinstance(e, VecLit):
            for item in e.items:
                walk(item, scope)
        elif isinstance(e, Index):
            walk(e.base, scope)
            walk(e.index, scope)
        elif isinstance(e, BinOp):
            walk(e.left, scope)
            walk(e.right, scope)
        elif isinstance(e, UnOp):
            walk(e.operand, scope)
        elif isinstance(e, If):
            walk(e.cond, scope)
            walk(e.then, scope)
            walk(e.orelse, scope)

    walk(k.body, frozenset(k.params))


def _check_app(app: SkeletonApp, bound: set[str], errors: list[Diagnostic]) -> list[str]:
    """Check one skeleton application; return the image names it reads."""
    shapes = SHAPES.get(app.skeleton)
    if shapes is None:
        errors.append(_diag("E_UNBOUND", app.pos, f"unknown skeleton '{app.skeleton}'"))
        return []
    is_combine = app.skeleton.startswith("combine")
    for i, arg in enumerate(app.args):
        if isinstance(arg, AppendArg) and (not is_combine or i != len(app.args) - 1):
            errors.append(_diag("E_APPEND", arg.pos, "'append' is only valid as the kernel of combineRow/combineCol"))
            return []
    if not any(len(s) == len(app.args) and all(map(_matches, app.args, s)) for s in shapes):
        errors.append(_diag(
            "E_ARITY", app.pos,
            f"{app.skeleton} expects {_SIGNATURES[app.skeleton]} ({len(app.args)} arguments given)"))
        return []
    used = []
    for arg in app.args:
        if isinstance(arg, NameArg):
            if arg.name not in bound:
                errors.append(_diag("E_UNBOUND", arg.pos, f"'{arg.name}' is not bound before use"))
            used.append(arg.name)
        elif isinstance(arg, Kernel):
            _check_kernel(arg, errors)
    if is_combine and isinstance(app.args[-1], AppendArg) and len(app.args) == 5:
        a, b = app.args[2].value, app.args[3].value
        if b != 2 * a:
            errors.append(_diag("E_APPEND", app.args[3].pos, f"append produces B = 2*A = {2 * a}, not {b}"))
    return used


def check_program(p: Program) -> Program:
    """Enforce single assignment, definition before use, skeleton arity and
    append placement. Returns ``p`` unchanged or raises CompileError
    listing every violation.
    """
    errors: list[Diagnostic] = []
    bound: set[str] = set()

    def bind(name: str, pos: Pos) -> None:
        if name in bound:
            errors.append(_diag("E_REBIND", pos, f"'{name}' is already bound"))
        bound.add(name)

    if not p.inputs:
        errors.append(_diag("E_ARITY", (1, 1), "program declares no inputs"))
    if not p.outputs:
        errors.append(_diag("E_ARITY", (1, 1), "program declares no outputs"))
    for inp in p.inputs:
        bind(inp.name, inp.pos)
    for b in p.bindings:
        _check_app(b.app, bound, errors)
        bind(b.name, b.pos)
    seen_out: set[str] = set()
    for o in p.outputs:
        if o.name not in bound:
            errors.append(_diag("E_UNBOUND", o.pos, f"output '{o.name}' is not bound"))
        elif o.name in seen_out:
            errors.append(_diag("E_REBIND", o.pos, f"output '{o.name}' declared twice"))
        seen_out.add(o.name)
    if errors:
        errors.sort(key=lambda d: (d.line, d.col))
        raise CompileError(errors)
    return p
