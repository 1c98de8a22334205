"""Random well-typed RIPL programs for differential testing.

Programs are emitted as source text so every run also exercises the
parser. Kernels come from a pool of templates that cannot fault at run
time (divisors are positive constants, dynamic indices are reduced
modulo the vector length).
"""

from __future__ import annotations

import random

from .ast import SKELETONS
from .image import Image

DIMS = (1, 2, 3, 4, 5, 6, 8, 9, 10, 12, 16, 20, 24, 32)


def divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.locals = 0

    def local(self) -> str:
        self.locals += 1
        return f"t{self.locals}"

    def c(self, lo=1, hi=64) -> int:
        return self.rng.randint(lo, hi)

    # a scalar expression over pixel-valued sub-expression ``x``
    def scalar(self, x: str) -> str:
        r, c = self.rng, self.c()
        choices = [
            f"{x} + {c}", f"{x} - {c}", f"255 - {x}", f"{x} * {self.c(1, 4)}",
            f"{x} / {self.c(1, 9)}", f"{x} % {self.c(1, 50)}", f"min({x}, {c})",
            f"max({x}, {c})", f"abs({x} - {c})", f"clamp({x} * 2 - {c}, 0, 255)",
            f"if {x} > {c} then {x} else 0", f"({x} > {c}) * 255", f"!({x} < {c}) * {x}",
            f"-{x}", f"{x}", f"({x} >= {c} && {x} <= {c + 40}) * {x}",
            f"({x} == {c} || {x} != {c + 1}) + {x}",
        ]
        pick = r.choice(choices)
        if r.random() < 0.15:
            t = self.local()
            return f"let {t} = {x} * 3 in {t} / 4 + ({pick.replace(x, t, 1) if x.isidentifier() else t})"
        return pick

    def chunk_kernel(self, A: int, B: int) -> str:
        r = self.rng
        opts = ["elementwise", "shuffle", "mix"]
        if A == B:
            opts += ["identity", "upd", "dynamic"]
        kind = r.choice(opts)
        if kind == "identity":
            return "\\v -> v"
        if kind == "upd":
            i, j = r.randrange(A), r.randrange(A)
            return f"\\v -> upd(v, {i}, {self.scalar(f'v[{j}]')})"
        if kind == "dynamic":
            return f"\\v -> upd(v, v[0] % {A}, v[{A - 1}])"
        if kind == "shuffle":
            off = r.randrange(A)
            return "\\v -> [" + ", ".join(f"v[{(A - 1 - i + off) % A}]" for i in range(B)) + "]"
        if kind == "mix":
            return "\\v -> [" + ", ".join(
                f"(v[{i % A}] + v[{(i + 1) % A}]) / 2" for i in range(B)) + "]"
        return "\\v -> [" + ", ".join(self.scalar(f"v[{i % A}]") for i in range(B)) + "]"

    def zip_kernel(self) -> str:
        return "\\p q -> " + self.rng.choice([
            "p + q", "p - q", "(p + q) / 2", "max(p, q)", "min(p, q)", "abs(p - q)",
            "if p > q then p - q else q - p", "p * q / 255", "p", self.scalar("q"),
        ])

    def combine_kernel(self, A: int, B: int) -> str:
        r = self.rng
        if r.random() < 0.5:
            items = [f"(x[{i % A}] + y[{(i + 1) % A}]) / 2" for i in range(B)]
        else:
            items = [r.choice([f"x[{i % A}]", f"y[{i % A}]", f"max(x[{i % A}], y[{i % A}])",
                               f"x[{i % A}] - y[{(A - 1 - i) % A}]"]) for i in range(B)]
        return "\\x y -> [" + ", ".join(items) + "]"

    def conv_kernel(self, n: int) -> str:
        r = self.rng
        total = " + ".join(f"w[{i}]" for i in range(n))
        kind = r.choice(["center", "mean", "max", "weighted", "edge", "corner"])
        if kind == "center":
            return f"\\w -> w[{n // 2}]"
        if kind == "corner":
            return f"\\w -> w[{r.randrange(n)}]"
        if kind == "mean":
            return f"\\w -> clamp(({total}) / {n}, 0, 255)"
        if kind == "max":
            e = "w[0]"
            for i in range(1, n):
                e = f"max({e}, w[{i}])"
            return f"\\w -> {e}"
        if kind == "weighted":
            ws = [r.randint(1, 3) for _ in range(n)]
            body = " + ".join(f"w[{i}] * {k}" for i, k in enumerate(ws))
            return f"\\w -> ({body}) / {sum(ws)}"
        return f"\\w -> abs(w[{n // 2}] * {n} - ({total}))"

    def fold_scalar_kernel(self) -> str:
        return "\\p acc -> " + self.rng.choice([
            "acc + p", "acc * 3 + p", "max(acc, p)", "if p > acc then p else acc",
            "acc - p", "(acc * 31 + p) % 1000003",
        ])

    def fold_vector_kernel(self, s: int) -> str:
        r = self.rng
        if s == 256:
            return "\\p acc -> upd(acc, p, acc[p] + 1)"
        return r.choice([
            f"\\p acc -> upd(acc, p % {s}, acc[p % {s}] + 1)",
            f"\\p acc -> upd(acc, p * {s} / 256, acc[p * {s} / 256] + 1)",
            "\\p acc -> upd(acc, 0, acc[0] + p)",
        ])


def random_program(rng: random.Random, max_bindings: int = 6, max_dim: int = 32) -> str:
    """Source text of a random well-typed program."""
    g = _Gen(rng)
    dims = [d for d in DIMS if d <= max_dim]
    lines: list[str] = []
    pool: dict[str, tuple[int, int]] = {}
    uses: dict[str, int] = {}
    n_inputs = rng.choice([1, 1, 1, 2])
    shared = (rng.choice(dims), rng.choice(dims))
    for i in range(n_inputs):
        w, h = shared if rng.random() < 0.7 else (rng.choice(dims), rng.choice(dims))
        name = f"in{i}"
        lines.append(f"in {name} : image<{w},{h}>;")
        pool[name] = (w, h)
        uses[name] = 0
    fold_outs: list[str] = []

    for k in range(rng.randint(1, max_bindings)):
        name = f"b{k}"
        for _ in range(20):
            sk = rng.choice(SKELETONS)
            src = rng.choice(sorted(pool))
            M, N = pool[src]
            line = None
            out = (M, N)
            if sk in ("mapRow", "mapCol"):
                A = rng.choice(divisors(M if sk == "mapRow" else N))
                line = f"{sk}({src}, {A}, {g.chunk_kernel(A, A)})"
                args = [src]
            elif sk in ("concatMapRow", "concatMapCol"):
                dim = M if sk == "concatMapRow" else N
                A = rng.choice([d for d in divisors(dim) if d <= 8])
                B = rng.randint(1, max(1, min(8, max_dim * A // dim)))
                if B * dim // A > max_dim:
                    continue
                line = f"{sk}({src}, {A}, {B}, {g.chunk_kernel(A, B)})"
                out = (B * M // A, N) if sk == "concatMapRow" else (M, B * N // A)
                args = [src]
            elif sk in ("zipWithRow", "zipWithCol", "combineRow", "combineCol"):
                partners = [n for n in sorted(pool) if pool[n] == (M, N)]
                other = rng.choice(partners)
                args = [src, other]
                if sk.startswith("zip"):
                    line = f"{sk}({src}, {other}, {g.zip_kernel()})"
                else:
                    dim = M if sk == "combineRow" else N
                    A = rng.choice([d for d in divisors(dim) if d <= 8])
                    if rng.random() < 0.4 and 2 * dim <= max_dim:
                        B = 2 * A
                        tail = rng.choice([f"{A}, append", f"{A}, {B}, append"])
                        line = f"{sk}({src}, {other}, {tail})"
                    else:
                        B = rng.randint(1, max(1, min(8, max_dim * A // dim)))
                        if B * dim // A > max_dim:
                            continue
                        line = f"{sk}({src}, {other}, {A}, {B}, {g.combine_kernel(A, B)})"
                    out = (B * M // A, N) if sk == "combineRow" else (M, B * N // A)
            elif sk == "convolve":
                a = rng.choice([x for x in (1, 3, 5) if x <= M])
                b = rng.choice([x for x in (1, 3, 5) if x <= N])
                line = f"convolve({src}, ({a}, {b}), {g.conv_kernel(a * b)})"
                args = [src]
            elif sk == "foldScalar":
                line = f"foldScalar({src}, {rng.randint(0, 10)}, {g.fold_scalar_kernel()})"
                args = [src]
                out = None
            else:
                s = rng.choice([256, 1, 2, 4, 7, 16])
                line = f"foldVector({src}, {rng.randint(0, 3)}, {s}, {g.fold_vector_kernel(s)})"
                args = [src]
                out = None
            break
        else:
            continue
        lines.append(f"let {name} = {line};")
        for a in args:
            uses[a] += 1
        if out is None:
            fold_outs.append(name)
        else:
            pool[name] = out
            uses[name] = 0

    outs = [n for n in uses if uses[n] == 0]
    outs += [n for n in uses if uses[n] > 0 and rng.random() < 0.2]
    lines += [f"out {n};" for n in fold_outs + outs]
    return "\n".join(lines) + "\n"


def random_image(rng: random.Random, width: int, height: int) -> Image:
    mode = rng.random()
    if mode < 0.1:
        return Image.constant(width, height, rng.randrange(256))
    if mode < 0.3:
        lo = rng.randrange(200)
        return Image(width, height, tuple(rng.randint(lo, lo + 55) for _ in range(width * height)))
    return Image(width, height, tuple(rng.randrange(256) for _ in range(width * height)))
