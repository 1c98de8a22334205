"""Compile kernel ASTs to Python callables for the streaming simulator.

The oracle walks the tree; this module generates Python source instead, so
the two evaluation routes share nothing but the AST.
"""

from __future__ import annotations

from .ast import BinOp, Call, Expr, If, Index, IntLit, Kernel, Let, UnOp, Var, VecLit
from .errors import EvalError, error

_OFF = 1 << 63
_MASK = (1 << 64) - 1


def _wrap(code: str) -> str:
    return f"(((({code}) + {_OFF}) & {_MASK}) - {_OFF})"


def _rt_div(a, b, pos):
    if b == 0:
        raise error(EvalError, "E_DIVZERO", pos, "'/' by zero")
    q = abs(a) // abs(b)
    q = q if (a >= 0) == (b >= 0) else -q
    return (((q + _OFF) & _MASK) - _OFF)


def _rt_mod(a, b, pos):
    if b == 0:
        raise error(EvalError, "E_DIVZERO", pos, "'%' by zero")
    q = abs(a) // abs(b)
    q = q if (a >= 0) == (b >= 0) else -q
    return a - q * b


def _rt_idx(vec, i, pos):
    if i < 0 or i >= len(vec):
        raise error(EvalError, "E_INDEX", pos, f"index {i} out of range for vector of length {len(vec)}")
    return vec[i]


def _rt_upd(vec, i, v, pos):
    if i < 0 or i >= len(vec):
        raise error(EvalError, "E_INDEX", pos, f"upd index {i} out of range for vector of length {len(vec)}")
    return vec[:i] + (v,) + vec[i + 1:]


class _Gen:
    def __init__(self, kernel: Kernel):
        self.consts: list = []
        self.kernel = kernel

    def const(self, value) -> str:
        self.consts.append(value)
        return f"_c{len(self.consts) - 1}"

    def expr(self, e: Expr) -> str:
        if isinstance(e, IntLit):
            return repr(e.value)
        if isinstance(e, Var):
            return "k_" + e.name
        if isinstance(e, VecLit):
            return "(" + "".join(self.expr(i) + ", " for i in e.items) + ")"
        if isinstance(e, Index):
            base = self.expr(e.base)
            if isinstance(e.index, IntLit) and e.index.value >= 0:
                # in range: checked statically by the type checker
                return f"{base}[{e.index.value}]"
            return f"_idx({base}, {self.expr(e.index)}, {self.const(e.pos)})"
        if isinstance(e, BinOp):
            a, b = self.expr(e.left), self.expr(e.right)
            if e.op in ("+", "-", "*"):
                return _wrap(f"{a} {e.op} {b}")
            if e.op == "/":
                return f"_div({a}, {b}, {self.const(e.pos)})"
            if e.op == "%":
                return f"_mod({a}, {b}, {self.const(e.pos)})"
            if e.op == "&&":
                return f"(1 if ({a}) and ({b}) else 0)"
            if e.op == "||":
                return f"(1 if ({a}) or ({b}) else 0)"
            return f"(1 if {a} {e.op} {b} else 0)"
        if isinstance(e, UnOp):
            v = self.expr(e.operand)
            return _wrap(f"-{v}") if e.op == "-" else f"(1 if {v} == 0 else 0)"
        if isinstance(e, If):
            return f"({self.expr(e.then)} if {self.expr(e.cond)} else {self.expr(e.orelse)})"
        if isinstance(e, Let):
            return f"(k_{e.name} := {self.expr(e.value)}, {self.expr(e.body)})[1]"
        if isinstance(e, Call):
            args = [self.expr(a) for a in e.args]
            if e.func in ("min", "max"):
                return f"{e.func}({args[0]}, {args[1]})"
            if e.func == "abs":
                return _wrap(f"abs({args[0]})")
            if e.func == "clamp":
                return f"min(max({args[0]}, {args[1]}), {args[2]})"
            if e.func == "upd":
                return f"_upd({args[0]}, {args[1]}, {args[2]}, {self.const(e.pos)})"
        raise TypeError(f"cannot compile {e!r}")


def compile_kernel(k: Kernel):
    """Return a Python function taking the kernel's arguments positionally."""
    gen = _Gen(k)
    body = gen.expr(k.body)
    params = ", ".join("k_" + p for p in k.params)
    src = f"def _kernel({params}):\n    return {body}\n"
    env = {"_div": _rt_div, "_mod": _rt_mod, "_idx": _rt_idx, "_upd": _rt_upd}
    env.update({f"_c{i}": c for i, c in enumerate(gen.consts)})
    exec(compile(src, "<ripl kernel>", "exec"), env)
    fn = env["_kernel"]
    fn.source = src
    return fn
