from __future__ import annotations

import pytest

from ripl import __version__
from ripl.dpn import lower
from ripl.emit import IrError, emit_actor_ir, emit_dot, read_actor_ir

from conftest import CORPUS, build, fuzz_cases


def test_dot_shape():
    _, g = build("in x : image<4,4>;\nlet m = mapRow(x, 1, \\v -> v);\nout m;\n")
    dot = emit_dot(g)
    assert dot.count(" [label=\"") == 3 + 2
    assert dot.count(" -> ") == 2
    assert '"m" [label="Map\\nm\\nstate=1"];' in dot
    assert '"in:x" -> "m" [label="depth=8 RowMajor"];' in dot


def test_dot_single_transpose_for_row_then_col():
    _, g = build("in x : image<4,4>;\nlet a = mapRow(x, 1, \\v -> v);\nlet b = mapCol(a, 1, \\v -> v);\nout b;\n")
    dot = emit_dot(g)
    assert dot.count('[label="Transpose\\n') == 1
    assert '[label="depth=8 ColMajor"]' in dot


def test_dot_node_order_is_topological_by_id():
    _, g = build("in x : image<8,8>;\nlet m = mapRow(x, 1, \\v -> v);\n"
                 "let c = convolve(x, (3, 3), \\w -> w[4]);\nlet z = zipWithRow(m, c, \\p q -> p);\nout z;\n")
    nodes = [line.split('"')[1] for line in emit_dot(g).splitlines() if "[label=\"" in line and " -> " not in line]
    assert nodes == ["in:x", "c", "m", "z", "out:z"]


def test_emitters_are_deterministic():
    for path in CORPUS:
        tp, g = build(path.read_text())
        again = lower(tp)
        assert emit_dot(g) == emit_dot(again)
        assert emit_actor_ir(g) == emit_actor_ir(again)


def test_ir_rates_for_map_and_fold():
    _, g = build("in x : image<4,4>;\nlet m = mapRow(x, 2, \\v -> [v[1], v[0]]);\n"
                 "let h = foldVector(m, 0, 256, \\p acc -> upd(acc, p, acc[p] + 1));\nout h;\n")
    ir = emit_actor_ir(g)
    m_block = ir.split("actor m : Map\n")[1].split("\nend\n")[0]
    assert "  in p0 rate 2" in m_block and "  out p0 rate 2" in m_block
    assert "  fire { \\v -> [v[1], v[0]] }" in m_block
    h_block = ir.split("actor h : Fold\n")[1].split("\nend\n")[0]
    assert "  in p0 rate 1" in h_block and "  out p0 rate 256 per-frame" in h_block
    assert "  state 256" in h_block


def test_ir_header_and_wires():
    _, g = build("in x : image<4,2>;\nout x;\n")
    ir = emit_actor_ir(g)
    assert ir.startswith(f"ripl-ir 1\ntool riplc {__version__}\nframe in:x 4 2\n")
    assert "wire in:x.p0 -> out:x.p0 depth 8 " in ir


def test_ir_append_fire_rule():
    _, g = build("in a : image<4,2>;\nin b : image<4,2>;\nlet c = combineRow(a, b, 4, append);\nout c;\n")
    assert "  fire { append }" in emit_actor_ir(g)


def test_ir_round_trip():
    graphs = [build(p.read_text())[1] for p in CORPUS]
    graphs += [lower(tp) for _, tp, _ in fuzz_cases(seed=51, count=60)]
    for g in graphs:
        text = emit_actor_ir(g)
        back = read_actor_ir(text)
        assert back == g
        assert emit_actor_ir(back) == text


def structure(g):
    # what DOT can show: kernels and rates are not part of the drawing
    actors = sorted((a.id, a.kind, a.state) for a in g.actors.values())
    wires = sorted((w.src[0], w.dst[0], w.capacity, w.orientation) for w in g.wires)
    return actors, wires


def test_distinct_graphs_give_distinct_texts():
    by_ir, by_dot = {}, {}
    for _, tp, _ in fuzz_cases(seed=52, count=80):
        g = lower(tp)
        ir, dot = emit_actor_ir(g), emit_dot(g)
        if ir in by_ir:
            assert by_ir[ir] == g
        if dot in by_dot:
            assert by_dot[dot] == structure(g)
        by_ir[ir], by_dot[dot] = g, structure(g)
    assert len(by_ir) > 70


def test_reader_rejects_garbage():
    with pytest.raises(IrError):
        read_actor_ir("not ir\n")
    _, g = build("in x : image<4,2>;\nout x;\n")
    broken = emit_actor_ir(g).replace("depth 8", "depth eight")
    with pytest.raises(IrError):
        read_actor_ir(broken)
