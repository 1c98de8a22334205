from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

from ripl.dpn import lower
from ripl.fuzz import random_image, random_program
from ripl.typesize import compile_source

ROOT = Path(__file__).resolve().parent.parent
CORPUS = sorted((ROOT / "corpus").glob("*.ripl"))


def build(src: str, **kw):
    tp = compile_source(src)
    return tp, lower(tp, **kw)


def images_for(tp, rng: random.Random):
    return {n: random_image(rng, t.width, t.height) for n, t in tp.inputs.items()}


def fuzz_cases(seed: int, count: int):
    """Yield (source, typed program, inputs) triples from a fixed seed."""
    rng = random.Random(seed)
    for _ in range(count):
        src = random_program(rng)
        tp = compile_source(src)
        yield src, tp, images_for(tp, rng)


def chain(k: int, w: int, h: int) -> str:
    lines = [f"in x : image<{w},{h}>;"]
    prev = "x"
    for i in range(k):
        lines.append(f"let s{i} = mapRow({prev}, 1, \\v -> [v[0] + 1]);")
        prev = f"s{i}"
    lines.append(f"out {prev};")
    return "\n".join(lines) + "\n"


def alternating(n: int, w: int, h: int) -> str:
    lines = [f"in x : image<{w},{h}>;"]
    prev = "x"
    for i in range(n):
        sk = "mapCol" if i % 2 == 0 else "mapRow"
        lines.append(f"let s{i} = {sk}({prev}, 1, \\v -> v);")
        prev = f"s{i}"
    return "\n".join(lines + [f"out {prev};"]) + "\n"


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        name, ok, detail = results[n]
        terminalreporter.write_line(mod.line(n, name, ok, detail))
