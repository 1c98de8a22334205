from __future__ import annotations

import copy
import random

import pytest

from ripl.dpn import (
    Wire, actor_rates, assign_fifo_depths, assign_rates, build_graph,
    insert_orientation_adapters, lower, validate_graph, warmup_latency,
)
from ripl.emit import emit_dot
from ripl.errors import CompileError
from ripl.fuzz import random_image
from ripl.sim import simulate
from ripl.typesize import compile_source

from conftest import build, chain, fuzz_cases

ROW_COL = "in x : image<8,8>;\nlet a = mapRow(x, 1, \\v -> v);\nlet b = mapCol(a, 1, \\v -> v);\nout b;\n"
ROW_ROW = "in x : image<8,8>;\nlet a = mapRow(x, 1, \\v -> v);\nlet b = mapRow(a, 1, \\v -> v);\nout b;\n"
ALTERNATING = ("in x : image<8,8>;\nlet a = mapRow(x, 1, \\v -> v);\nlet b = mapCol(a, 2, \\v -> v);\n"
               "let c = mapRow(b, 4, \\v -> v);\nlet d = mapCol(c, 8, \\v -> v);\nout d;\n")
DIAMOND = ("in x : image<16,8>;\nlet m = mapRow(x, 1, \\v -> v);\n"
           "let c = convolve(x, (3, 3), \\w -> w[4]);\nlet z = zipWithRow(m, c, \\p q -> (p + q) / 2);\nout z;\n")


def dot_transposes(src: str) -> int:
    _, g = build(src)
    return emit_dot(g).count('[label="Transpose\\n')


def test_transpose_counts_on_dot():
    assert dot_transposes(ROW_COL) == 1
    assert dot_transposes(ROW_ROW) == 0
    assert dot_transposes(ALTERNATING) == 3


def test_source_feeding_column_skeleton_needs_transpose():
    src = "in x : image<4,4>;\nlet a = mapCol(x, 1, \\v -> v);\nout a;\n"
    _, g = build(src)
    (t,) = g.transposes()
    assert t.state == 16
    assert not validate_graph(g)


def test_sink_takes_either_orientation():
    src = "in x : image<4,4>;\nlet a = mapCol(x, 1, \\v -> v);\nout a;\nout x;\n"
    _, g = build(src)
    assert len(g.transposes()) == 1


def test_actor_count_invariant():
    for _, tp, _ in fuzz_cases(seed=5, count=100):
        g = lower(tp)
        expected = len(tp.inputs) + len(tp.bindings) + len(tp.outputs) + len(g.transposes())
        assert len(g.actors) == expected
        assert validate_graph(g) == []


def test_adapter_insertion_is_idempotent():
    for _, tp, _ in fuzz_cases(seed=6, count=60):
        once = insert_orientation_adapters(build_graph(tp))
        assert insert_orientation_adapters(once) == once


def test_double_transpose_is_identity(rng):
    src = ("in x : image<6,4>;\nlet a = mapCol(x, 1, \\v -> v);\n"
           "let b = mapRow(a, 1, \\v -> v);\nout b;\n")
    tp, g = build(src)
    assert len(g.transposes()) == 2
    im = random_image(rng, 6, 4)
    assert simulate(g, {"x": im}).outputs["b"] == [im]


def test_rates_follow_chunk_sizes():
    src = ("in x : image<8,4>;\nlet a = concatMapRow(x, 2, 4, \\v -> [v[0], v[0], v[1], v[1]]);\n"
           "let f = foldVector(a, 0, 256, \\p acc -> upd(acc, p, acc[p] + 1));\nout f;\n")
    _, g = build(src)
    assert actor_rates(g.actors["a"]) == ([2], 4)
    assert [p.rate for p in g.actors["f"].inputs] == [1]
    assert [p.rate for p in g.actors["f"].outputs] == [256]


def test_rates_divide_frames():
    for _, tp, _ in fuzz_cases(seed=8, count=80):
        g = lower(tp)
        for w in g.wires:
            prod = g.actors[w.src[0]].out_port(w.src[1]).rate
            cons = g.actors[w.dst[0]].in_port(w.dst[1]).rate
            assert w.frame_tokens % prod == 0 and w.frame_tokens % cons == 0


def test_straight_pipeline_default_depths():
    _, g = build(chain(5, 8, 8))
    assert {w.capacity for w in g.wires} == {8}
    _, g = build("in x : image<4,4>;\nout x;\n")
    assert [w.capacity for w in g.wires] == [8]


def test_multirate_wire_minimum():
    # producer emits 10, consumer takes 4: 10 + 4 - gcd(10, 4) = 12 slots
    src = ("in x : image<20,2>;\nlet a = concatMapRow(x, 5, 10, \\v -> [v[0], v[1], v[2], v[3], v[4], "
           "v[0], v[1], v[2], v[3], v[4]]);\nlet b = mapRow(a, 4, \\v -> v);\nout b;\n")
    _, g = build(src)
    (w,) = [w for w in g.wires if w.src[0] == "a"]
    assert w.capacity == 12


def test_reconvergent_branch_deepened():
    _, g = build(DIAMOND)
    short = [w for w in g.wires if w.src[0] == "in:x" and w.dst[0] == "m"] + \
            [w for w in g.wires if w.src[0] == "m"]
    long_ = [w for w in g.wires if w.dst[0] == "c"] + [w for w in g.wires if w.src[0] == "c"]
    assert warmup_latency(g.actors["c"]) == 2 * 16 + 3
    # latency difference 35 - 1, plus one
    assert sum(w.capacity for w in short) >= 35
    assert all(w.capacity == 8 for w in long_)


def test_depth_assignment_is_pure_and_deterministic():
    tp = compile_source(DIAMOND)
    g = assign_rates(insert_orientation_adapters(build_graph(tp)))
    before = copy.deepcopy(g)
    assert assign_fifo_depths(g) == assign_fifo_depths(g)
    assert g == before


def test_unused_value_is_rejected_at_lowering():
    tp = compile_source("in x : image<4,4>;\nlet a = mapRow(x, 1, \\v -> v);\nout x;\n")
    with pytest.raises(CompileError) as ei:
        build_graph(tp)
    assert ei.value.code == "E_UNUSED"


def test_validate_reports_dangling_port():
    _, g = build(ROW_ROW)
    g.wires = [w for w in g.wires if w.dst != ("b", "p0")]
    assert any("unconnected port" in v for v in validate_graph(g))


def test_validate_reports_cycle():
    _, g = build(ROW_ROW)
    g.wires.append(Wire("w99", ("b", "p9"), ("a", "p1"), 8, "RowMajor", "Pixel", (8, 8)))
    assert "cycle" in validate_graph(g)


def test_validate_reports_orientation_mismatch():
    _, g = build(ROW_COL)
    # splice the transpose back out
    (t,) = g.transposes()
    inw = [w for w in g.wires if w.dst[0] == t.id][0]
    outw = [w for w in g.wires if w.src[0] == t.id][0]
    del g.actors[t.id]
    g.wires = [w for w in g.wires if w not in (inw, outw)]
    g.wires.append(Wire(inw.id, inw.src, outw.dst, 8, inw.orientation, inw.token, inw.dims))
    assert any("orientation" in v for v in validate_graph(g))


def test_validate_never_raises_on_garbage():
    _, g = build(ROW_ROW)
    g.wires.append(Wire("wx", ("nowhere", "p0"), ("a", "p0"), 0, "RowMajor", "Pixel", (8, 8)))
    problems = validate_graph(g)
    assert problems and all(isinstance(p, str) for p in problems)


def test_lowering_is_deterministic():
    rng = random.Random(2)
    for _, tp, _ in fuzz_cases(seed=rng.randrange(1000), count=30):
        assert emit_dot(lower(tp)) == emit_dot(lower(tp))
