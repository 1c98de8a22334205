"""Syntax tree for RIPL programs and kernels, plus the canonical printer.

Source positions ride along on every node but never take part in equality,
so a re-parsed program compares equal to the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

Pos = tuple[int, int]


def _pos() -> Pos:
    return field(default=(0, 0), compare=False, repr=False)


# ---------------------------------------------------------------- kernels


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class VecLit:
    items: tuple["Expr", ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Let:
    name: str
    value: "Expr"
    body: "Expr"
    pos: Pos = _pos()


Expr = Union[IntLit, Var, VecLit, Index, BinOp, UnOp, If, Call, Let]

BUILTINS = {"min": 2, "max": 2, "abs": 1, "clamp": 3, "upd": 3}


@dataclass(frozen=True)
class Kernel:
    params: tuple[str, ...]
    body: Expr
    pos: Pos = _pos()


# ---------------------------------------------------------------- programs


@dataclass(frozen=True)
class NameArg:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class IntArg:
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class PairArg:
    first: int
    second: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class AppendArg:
    pos: Pos = _pos()


Actual = Union[NameArg, IntArg, PairArg, Kernel, AppendArg]

SKELETONS = (
    "mapRow", "mapCol", "concatMapRow", "concatMapCol", "zipWithRow", "zipWithCol",
    "combineRow", "combineCol", "convolve", "foldVector", "foldScalar",
)


@dataclass(frozen=True)
class SkeletonApp:
    skeleton: str
    args: tuple[Actual, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class InputDecl:
    name: str
    width: int
    height: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class Binding:
    name: str
    app: SkeletonApp
    pos: Pos = _pos()


@dataclass(frozen=True)
class OutputDecl:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Program:
    inputs: tuple[InputDecl, ...]
    bindings: tuple[Binding, ...]
    outputs: tuple[OutputDecl, ...]


# ---------------------------------------------------------------- printer

_PREC = {
    "||": 1, "&&": 2,
    "<": 3, "<=": 3, ">": 3, ">=": 3, "==": 3, "!=": 3,
    "+": 4, "-": 4, "*": 5, "/": 5, "%": 5,
}
_UNARY_PREC = 6
_ATOM_PREC = 7


def _prec(e: Expr) -> int:
    if isinstance(e, (Let, If)):
        return 0
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, UnOp):
        return _UNARY_PREC
    return _ATOM_PREC


def _wrap(e: Expr, min_prec: int) -> str:
    text = pretty_expr(e)
    return f"({text})" if _prec(e) < min_prec else text


def pretty_expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, VecLit):
        return "[" + ", ".join(pretty_expr(i) for i in e.items) + "]"
    if isinstance(e, Index):
        return f"{_wrap(e.base, _ATOM_PREC)}[{pretty_expr(e.index)}]"
    if isinstance(e, Call):
        return f"{e.func}(" + ", ".join(pretty_expr(a) for a in e.args) + ")"
    if isinstance(e, UnOp):
        return e.op + _wrap(e.operand, _UNARY_PREC)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # comparisons do not chain
        left_min = p + 1 if p == 3 else p
        return f"{_wrap(e.left, left_min)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, If):
        return f"if {pretty_expr(e.cond)} then {pretty_expr(e.then)} else {pretty_expr(e.orelse)}"
    if isinstance(e, Let):
        return f"let {e.name} = {pretty_expr(e.value)} in {pretty_expr(e.body)}"
    raise TypeError(f"not an expression: {e!r}")


def pretty_kernel(k: Kernel) -> str:
    return "\\" + " ".join(k.params) + " -> " + pretty_expr(k.body)


def pretty_actual(a: Actual) -> str:
    if isinstance(a, NameArg):
        return a.name
    if isinstance(a, IntArg):
        return str(a.value)
    if isinstance(a, PairArg):
        return f"({a.first}, {a.second})"
    if isinstance(a, AppendArg):
        return "append"
    return pretty_kernel(a)


def pretty_program(p: Program) -> str:
    lines = [f"in {i.name} : image<{i.width},{i.height}>;" for i in p.inputs]
    for b in p.bindings:
        args = ", ".join(pretty_actual(a) for a in b.app.args)
        lines.append(f"let {b.name} = {b.app.skeleton}({args});")
    lines.extend(f"out {o.name};" for o in p.outputs)
    return "\n".join(lines) + "\n"
