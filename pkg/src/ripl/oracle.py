"""Reference semantics: whole-image evaluation of typed programs.

Written for obviousness. The streaming simulator is checked against this.
"""

from __future__ import annotations

from typing import Mapping, Union

from .ast import BinOp, Call, Expr, If, Index, IntLit, Kernel, Let, UnOp, Var, VecLit
from .errors import EvalError, error
from .image import Image
from .typesize import ImageType, TypedBinding, TypedProgram

Value = Union[Image, tuple, int]

_MASK = (1 << 64) - 1


def _i64(v: int) -> int:
    v &= _MASK
    return v - (1 << 64) if v >> 63 else v


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _eval(e: Expr, env: dict):
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, VecLit):
        return tuple(_eval(i, env) for i in e.items)
    if isinstance(e, Index):
        vec = _eval(e.base, env)
        i = _eval(e.index, env)
        if not 0 <= i < len(vec):
            raise error(EvalError, "E_INDEX", e.pos, f"index {i} out of range for vector of length {len(vec)}")
        return vec[i]
    if isinstance(e, BinOp):
        if e.op == "&&":
            return int(bool(_eval(e.left, env)) and bool(_eval(e.right, env)))
        if e.op == "||":
            return int(bool(_eval(e.left, env)) or bool(_eval(e.right, env)))
        a, b = _eval(e.left, env), _eval(e.right, env)
        op = e.op
        if op == "+":
            return _i64(a + b)
        if op == "-":
            return _i64(a - b)
        if op == "*":
            return _i64(a * b)
        if op in ("/", "%"):
            if b == 0:
                raise error(EvalError, "E_DIVZERO", e.pos, f"'{op}' by zero")
            q = _trunc_div(a, b)
            return _i64(q) if op == "/" else a - q * b
        return int({"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b, "==": a == b, "!=": a != b}[op])
    if isinstance(e, UnOp):
        v = _eval(e.operand, env)
        return _i64(-v) if e.op == "-" else int(v == 0)
    if isinstance(e, If):
        return _eval(e.then if _eval(e.cond, env) else e.orelse, env)
    if isinstance(e, Let):
        return _eval(e.body, {**env, e.name: _eval(e.value, env)})
    if isinstance(e, Call):
        args = [_eval(a, env) for a in e.args]
        if e.func == "min":
            return min(args)
        if e.func == "max":
            return max(args)
        if e.func == "abs":
            return _i64(abs(args[0]))
        if e.func == "clamp":
            return min(max(args[0], args[1]), args[2])
        if e.func == "upd":
            vec, i, v = args
            if not 0 <= i < len(vec):
                raise error(EvalError, "E_INDEX", e.pos, f"upd index {i} out of range for vector of length {len(vec)}")
            return vec[:i] + (v,) + vec[i + 1:]
    raise TypeError(f"cannot evaluate {e!r}")


def eval_kernel(k: Kernel, args: list):
    """Big-step evaluation; vectors are tuples, scalars ints."""
    return _eval(k.body, dict(zip(k.params, args)))


def _px(v: int) -> int:
    return 0 if v < 0 else 255 if v > 255 else v


def _chunks(seq, n):
    return [tuple(seq[i:i + n]) for i in range(0, len(seq), n)]


def _from_columns(cols: list) -> Image:
    width, height = len(cols), len(cols[0])
    return Image(width, height, tuple(cols[x][y] for y in range(height) for x in range(width)))


def _chunk_map(lines: list, A: int, fn) -> list:
    out = []
    for line in lines:
        new = []
        for chunk in _chunks(line, A):
            new.extend(_px(v) for v in fn(chunk))
        out.append(new)
    return out


def apply_skeleton(tb: TypedBinding, inputs: list[Image]) -> Value:
    """Evaluate one skeleton application on fully materialised images."""
    for im, t in zip(inputs, tb.in_types):
        if (im.width, im.height) != (t.width, t.height):
            raise error(EvalError, "E_DIMS", tb.pos, f"{tb.skeleton} got {im.width}x{im.height}, annotated {t}")
    sk, k, p = tb.skeleton, tb.kernel, tb.params
    im = inputs[0]

    if sk in ("mapRow", "concatMapRow"):
        return Image.from_rows(_chunk_map(im.rows(), p["A"], lambda c: eval_kernel(k, [c])))
    if sk in ("mapCol", "concatMapCol"):
        return _from_columns(_chunk_map(im.columns(), p["A"], lambda c: eval_kernel(k, [c])))
    if sk in ("zipWithRow", "zipWithCol"):
        other = inputs[1]
        return Image(im.width, im.height, tuple(
            _px(eval_kernel(k, [a, b])) for a, b in zip(im.pixels, other.pixels)))
    if sk in ("combineRow", "combineCol"):
        A = p["A"]
        if sk == "combineRow":
            left, right = im.rows(), inputs[1].rows()
        else:
            left, right = im.columns(), inputs[1].columns()
        lines = []
        for l1, l2 in zip(left, right):
            new = []
            for c1, c2 in zip(_chunks(l1, A), _chunks(l2, A)):
                res = c1 + c2 if k is None else eval_kernel(k, [c1, c2])
                new.extend(_px(v) for v in res)
            lines.append(new)
        return Image.from_rows(lines) if sk == "combineRow" else _from_columns(lines)
    if sk == "convolve":
        a, b = p["a"], p["b"]
        ha, hb = a // 2, b // 2
        M, N = im.width, im.height
        out = []
        for y in range(N):
            for x in range(M):
                window = tuple(
                    im[min(max(x + dx, 0), M - 1), min(max(y + dy, 0), N - 1)]
                    for dy in range(-hb, hb + 1)
                    for dx in range(-ha, ha + 1)
                )
                out.append(_px(eval_kernel(k, [window])))
        return Image(M, N, tuple(out))
    if sk == "foldScalar":
        acc = p["init"]
        for px in im.pixels:
            acc = eval_kernel(k, [px, acc])
        return acc
    if sk == "foldVector":
        acc = (p["init"],) * p["s"]
        for px in im.pixels:
            acc = eval_kernel(k, [px, acc])
        return acc
    raise ValueError(f"unknown skeleton {sk}")


def run_reference(tp: TypedProgram, inputs: Mapping[str, Image]) -> dict[str, Value]:
    """Evaluate bindings in program order; return outputs by name."""
    env: dict[str, Value] = {}
    for decl in tp.program.inputs:
        if decl.name not in inputs:
            raise error(EvalError, "E_INPUT_DIM", decl.pos, f"no image supplied for input '{decl.name}'")
        im = inputs[decl.name]
        want: ImageType = tp.types[decl.name]
        if (im.width, im.height) != (want.width, want.height):
            raise error(EvalError, "E_INPUT_DIM", decl.pos,
                        f"input '{decl.name}' is declared {want} but the image is {im.width}x{im.height}")
        env[decl.name] = im
    for tb in tp.bindings:
        env[tb.name] = apply_skeleton(tb, [env[n] for n in tb.inputs])
    return {name: env[name] for name in tp.outputs}
