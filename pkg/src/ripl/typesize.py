"""Size-indexed typing.

Every binding gets a concrete ``Im(M,N)``, ``[Int]_s`` or ``Int`` type and
every kernel is checked against the vector lengths its skeleton implies.
Pixels are 8-bit on image wires; inside kernels they are plain integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .ast import (
    AppendArg, BinOp, Call, Expr, If, Index, IntArg, IntLit, Kernel, Let, NameArg,
    PairArg, Pos, Program, UnOp, Var, VecLit,
)
from .errors import CompileError, Diagnostic


@dataclass(frozen=True)
class ImageType:
    width: int
    height: int

    def __str__(self) -> str:
        return f"Im({self.width},{self.height})"


@dataclass(frozen=True)
class VectorType:
    length: int
    element: str = "Int"  # "P" or "Int"

    def __str__(self) -> str:
        return f"[{self.element}]_{self.length}"


@dataclass(frozen=True)
class ScalarType:
    element: str = "Int"

    def __str__(self) -> str:
        return self.element


Type = Union[ImageType, VectorType, ScalarType]
PIXEL = ScalarType("P")
INT = ScalarType("Int")


def pixels(n: int) -> VectorType:
    return VectorType(n, "P")


@dataclass(frozen=True)
class KernelSig:
    params: tuple[Type, ...]
    result: Type

    def __str__(self) -> str:
        return " -> ".join(str(t) for t in (*self.params, self.result))


@dataclass(frozen=True)
class TypedBinding:
    name: str
    skeleton: str
    inputs: tuple[str, ...]
    params: dict = field(hash=False)
    kernel: Kernel | None  # None means the builtin append
    sig: KernelSig | None
    in_types: tuple[ImageType, ...]
    out_type: Type
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class TypedProgram:
    program: Program
    types: dict = field(hash=False)  # name -> Type, inputs included
    bindings: tuple[TypedBinding, ...]

    @property
    def inputs(self) -> dict[str, ImageType]:
        return {i.name: self.types[i.name] for i in self.program.inputs}

    @property
    def outputs(self) -> list[str]:
        return [o.name for o in self.program.outputs]


def _diag(code: str, pos: Pos, message: str) -> Diagnostic:
    return Diagnostic(code, pos[0], pos[1], message)


# ---------------------------------------------------------------- kernels


def const_value(e: Expr, env: dict[str, int] | None = None) -> int | None:
    """Fold ``e`` to an integer if it only involves literals and constant lets."""
    env = env or {}
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Var):
        return env.get(e.name)
    if isinstance(e, UnOp):
        v = const_value(e.operand, env)
        if v is None:
            return None
        return -v if e.op == "-" else int(v == 0)
    if isinstance(e, BinOp):
        a, b = const_value(e.left, env), const_value(e.right, env)
        if a is None or b is None:
            return None
        if e.op in ("/", "%"):
            if b == 0:
                return None
            q = abs(a) // abs(b) * (1 if (a >= 0) == (b >= 0) else -1)
            return q if e.op == "/" else a - q * b
        return {
            "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
            "<": lambda: int(a < b), "<=": lambda: int(a <= b), ">": lambda: int(a > b),
            ">=": lambda: int(a >= b), "==": lambda: int(a == b), "!=": lambda: int(a != b),
            "&&": lambda: int(bool(a) and bool(b)), "||": lambda: int(bool(a) or bool(b)),
        }[e.op]()
    if isinstance(e, Let):
        v = const_value(e.value, env)
        inner = dict(env)
        if v is None:
            inner.pop(e.name, None)
        else:
            inner[e.name] = v
        return const_value(e.body, inner)
    if isinstance(e, If):
        c = const_value(e.cond, env)
        if c is None:
            return None
        return const_value(e.then if c else e.orelse, env)
    if isinstance(e, Call) and e.func in ("min", "max", "abs", "clamp"):
        vals = [const_value(a, env) for a in e.args]
        if any(v is None for v in vals):
            return None
        if e.func == "min":
            return min(vals)
        if e.func == "max":
            return max(vals)
        if e.func == "abs":
            return abs(vals[0])
        return min(max(vals[0], vals[1]), vals[2])
    return None


def _same_shape(a: Type, b: Type) -> bool:
    if isinstance(a, VectorType) and isinstance(b, VectorType):
        return a.length == b.length
    return isinstance(a, ScalarType) and isinstance(b, ScalarType)


def kernel_type_check(k: Kernel, expected: KernelSig) -> Kernel:
    """Type a kernel body against ``expected``; return it unchanged or raise."""
    errors: list[Diagnostic] = []
    if len(k.params) != len(expected.params):
        raise CompileError(_diag(
            "E_KARITY", k.pos,
            f"kernel takes {len(k.params)} parameters, expected {len(expected.params)} ({expected})"))

    def expect_scalar(t: Type | None, pos: Pos, what: str) -> None:
        if t is not None and not isinstance(t, ScalarType):
            errors.append(_diag("E_KTYPE", pos, f"{what} must be a scalar, got {t}"))

    def check_index(idx: Expr, length: int, env: dict[str, int], pos: Pos) -> None:
        c = const_value(idx, env)
        if c is not None and not 0 <= c < length:
            errors.append(_diag("E_INDEX", pos, f"index {c} out of range for vector of length {length} (valid 0..{length - 1})"))

    def infer(e: Expr, tenv: dict[str, Type], cenv: dict[str, int]) -> Type | None:
        if isinstance(e, IntLit):
            return INT
        if isinstance(e, Var):
            if e.name not in tenv:
                errors.append(_diag("E_UNBOUND", e.pos, f"'{e.name}' is not bound in kernel"))
                return None
            return tenv[e.name]
        if isinstance(e, VecLit):
            for item in e.items:
                expect_scalar(infer(item, tenv, cenv), item.pos, "vector element")
            return VectorType(len(e.items))
        if isinstance(e, Index):
            bt = infer(e.base, tenv, cenv)
            expect_scalar(infer(e.index, tenv, cenv), e.index.pos, "index")
            if bt is None:
                return INT
            if not isinstance(bt, VectorType):
                errors.append(_diag("E_KTYPE", e.pos, f"cannot index a scalar ({bt})"))
                return INT
            check_index(e.index, bt.length, cenv, e.pos)
            return INT
        if isinstance(e, BinOp):
            expect_scalar(infer(e.left, tenv, cenv), e.left.pos, f"operand of '{e.op}'")
            expect_scalar(infer(e.right, tenv, cenv), e.right.pos, f"operand of '{e.op}'")
            return INT
        if isinstance(e, UnOp):
            expect_scalar(infer(e.operand, tenv, cenv), e.operand.pos, f"operand of '{e.op}'")
            return INT
        if isinstance(e, If):
            expect_scalar(infer(e.cond, tenv, cenv), e.cond.pos, "condition")
            a, b = infer(e.then, tenv, cenv), infer(e.orelse, tenv, cenv)
            if a is not None and b is not None and not _same_shape(a, b):
                code = "E_VLEN" if isinstance(a, VectorType) and isinstance(b, VectorType) else "E_KTYPE"
                errors.append(_diag(code, e.pos, f"branches disagree: {a} vs {b}"))
                return None
            return a if a is not None else b
        if isinstance(e, Call):
            ts = [infer(a, tenv, cenv) for a in e.args]
            if e.func == "upd":
                vt = ts[0]
                expect_scalar(ts[1], e.args[1].pos, "upd index")
                expect_scalar(ts[2], e.args[2].pos, "upd value")
                if vt is None:
                    return None
                if not isinstance(vt, VectorType):
                    errors.append(_diag("E_KTYPE", e.pos, f"upd needs a vector, got {vt}"))
                    return None
                check_index(e.args[1], vt.length, cenv, e.pos)
                return VectorType(vt.length)
            for a, t in zip(e.args, ts):
                expect_scalar(t, a.pos, f"argument of {e.func}")
            return INT
        if isinstance(e, Let):
            vt = infer(e.value, tenv, cenv)
            c = const_value(e.value, cenv)
            inner_c = {**cenv, e.name: c} if c is not None else {n: v for n, v in cenv.items() if n != e.name}
            return infer(e.body, {**tenv, e.name: vt}, inner_c)
        raise TypeError(e)

    tenv = dict(zip(k.params, expected.params))
    result = infer(k.body, tenv, {})
    if result is not None and not errors:
        want = expected.result
        if isinstance(want, VectorType) and isinstance(result, VectorType):
            if want.length != result.length:
                errors.append(_diag(
                    "E_VLEN", k.body.pos,
                    f"kernel returns a vector of length {result.length}, expected {want.length}"))
        elif not _same_shape(result, want):
            errors.append(_diag("E_KTYPE", k.body.pos, f"kernel returns {result}, expected {want}"))
    if errors:
        raise CompileError(errors)
    return k


# ---------------------------------------------------------------- programs

ROW_CHUNKED = {"mapRow", "concatMapRow", "combineRow"}
COL_CHUNKED = {"mapCol", "concatMapCol", "combineCol"}


def _static_args(b) -> tuple[list[str], list, Kernel | None]:
    names, statics, kernel = [], [], None
    for a in b.app.args:
        if isinstance(a, NameArg):
            names.append(a.name)
        elif isinstance(a, IntArg):
            statics.append(a.value)
        elif isinstance(a, PairArg):
            statics.append((a.first, a.second))
        elif isinstance(a, Kernel):
            kernel = a
        elif isinstance(a, AppendArg):
            kernel = None
    return names, statics, kernel


def infer_sizes(p: Program, image_outputs: bool = False) -> TypedProgram:
    """Annotate every binding of a checked program with its concrete size.

    With ``image_outputs`` set, every ``out`` must name an image.
    """
    errors: list[Diagnostic] = []
    types: dict[str, Type] = {}
    typed: list[TypedBinding] = []
    for inp in p.inputs:
        if inp.width < 1 or inp.height < 1:
            errors.append(_diag("E_DIM", inp.pos, f"image '{inp.name}' must be at least 1x1"))
        types[inp.name] = ImageType(max(inp.width, 1), max(inp.height, 1))

    for b in p.bindings:
        sk = b.app.skeleton
        pos = b.app.pos
        names, statics, kernel = _static_args(b)
        in_types = []
        bad = False
        for n in names:
            t = types.get(n)
            if not isinstance(t, ImageType):
                errors.append(_diag("E_DIM", pos, f"{sk} expects an image for '{n}', got {t}"))
                bad = True
            in_types.append(t)
        if bad:
            types[b.name] = INT  # keep going; downstream uses will report
            continue
        im = in_types[0]
        M, N = im.width, im.height
        if len(in_types) == 2 and in_types[0] != in_types[1]:
            errors.append(_diag("E_DIM", pos, f"{sk} operands differ in size: {in_types[0]} vs {in_types[1]}"))
            types[b.name] = im
            continue

        params: dict = {}
        sig: KernelSig
        out: Type
        if sk in ROW_CHUNKED or sk in COL_CHUNKED:
            A = statics[0]
            if sk.startswith("map"):
                B = A
            elif kernel is None and len(statics) == 1:
                B = 2 * A
            else:
                B = statics[1]
            dim = M if sk in ROW_CHUNKED else N
            if A < 1 or dim % A:
                axis = "width" if sk in ROW_CHUNKED else "height"
                errors.append(_diag("E_DIV", pos, f"chunk size A={A} does not divide image {axis} {dim}"))
                types[b.name] = im
                continue
            if B < 1:
                errors.append(_diag("E_DIV", pos, f"output chunk size B={B} must be positive"))
                types[b.name] = im
                continue
            params = {"A": A, "B": B} if not sk.startswith("map") else {"A": A}
            if sk in ROW_CHUNKED:
                out = ImageType(B * M // A, N)
            else:
                out = ImageType(M, B * N // A)
            if sk.startswith("combine"):
                sig = KernelSig((pixels(A), pixels(A)), pixels(B))
            else:
                sig = KernelSig((pixels(A),), pixels(B))
        elif sk in ("zipWithRow", "zipWithCol"):
            sig = KernelSig((PIXEL, PIXEL), PIXEL)
            out = im
        elif sk == "convolve":
            wa, wb = statics[0]
            if wa % 2 == 0 or wb % 2 == 0 or not (1 <= wa <= M) or not (1 <= wb <= N):
                errors.append(_diag(
                    "E_WINDOW", pos,
                    f"window ({wa},{wb}) must be odd and fit within {im} (width a <= {M}, height b <= {N})"))
                types[b.name] = im
                continue
            params = {"a": wa, "b": wb}
            sig = KernelSig((pixels(wa * wb),), PIXEL)
            out = im
        elif sk == "foldVector":
            init, s = statics
            if s < 1:
                errors.append(_diag("E_VLEN", pos, f"accumulator length s={s} must be positive"))
                types[b.name] = VectorType(1)
                continue
            params = {"init": init, "s": s}
            acc = VectorType(s)
            sig = KernelSig((PIXEL, acc), acc)
            out = acc
        else:  # foldScalar
            params = {"init": statics[0]}
            sig = KernelSig((PIXEL, INT), INT)
            out = INT

        if kernel is not None:
            try:
                kernel_type_check(kernel, sig)
            except CompileError as exc:
                errors.extend(exc.diagnostics)
        types[b.name] = out
        typed.append(TypedBinding(
            b.name, sk, tuple(names), params, kernel, sig if kernel is not None else None,
            tuple(in_types), out, b.pos))

    if image_outputs:
        for o in p.outputs:
            if not isinstance(types.get(o.name), ImageType):
                errors.append(_diag("E_SINK_TYPE", o.pos, f"output '{o.name}' is {types.get(o.name)}, not an image"))
    if errors:
        errors.sort(key=lambda d: (d.line, d.col))
        raise CompileError(errors)
    return TypedProgram(p, types, tuple(typed))


def compile_source(source: str, image_outputs: bool = False) -> TypedProgram:
    """parse, check_program and infer_sizes in one call."""
    from .frontend import check_program, parse

    return infer_sizes(check_program(parse(source)), image_outputs=image_outputs)
