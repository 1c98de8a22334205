from __future__ import annotations

import random
import re

import pytest

from ripl.dpn import force_depths, lower
from ripl.fuzz import random_image
from ripl.image import Image
from ripl.memest import state_elements
from ripl.oracle import run_reference
from ripl.sim import (
    Deadlock, SimConfig, SimulationError, default_max_ticks, detect_deadlock,
    measure_pipeline, simulate,
)
from ripl.typesize import compile_source

from conftest import build, chain, fuzz_cases, images_for

DIAMOND = ("in x : image<16,8>;\nlet m = mapRow(x, 1, \\v -> v);\n"
           "let c = convolve(x, (3, 3), \\w -> w[4]);\nlet z = zipWithRow(m, c, \\p q -> (p + q) / 2);\nout z;\n")


def test_identity_4x4(rng):
    _, g = build("in x : image<4,4>;\nlet o = mapRow(x, 1, \\v -> v);\nout o;\n")
    im = random_image(rng, 4, 4)
    res = simulate(g, {"x": im})
    assert res.outputs["o"] == [im]
    assert res.stats.wire_tokens[g.wires_into("out:o")[0].id] == 16


def test_fuzz_matches_reference():
    rng = random.Random(99)
    for src, tp, ims in fuzz_cases(seed=31, count=60):
        frames = rng.choice([1, 2])
        res = simulate(lower(tp), ims, SimConfig(frames=frames))
        ref = run_reference(tp, ims)
        for name in tp.outputs:
            assert res.outputs[name] == [ref[name]] * frames, src


def test_conservation_and_capacity():
    for src, tp, ims in fuzz_cases(seed=32, count=40):
        g = lower(tp)
        res = simulate(g, ims, SimConfig(frames=2, trace=True))
        st = res.stats
        cap = {w.id: w.capacity for w in g.wires}
        for line in res.trace:
            for wid, n in re.findall(r"(w\d+):(\d+)", line):
                assert int(n) <= cap[wid]
        for w in g.wires:
            assert st.wire_tokens[w.id] == st.wire_consumed[w.id] + st.wire_residual[w.id]
            assert st.wire_residual[w.id] == 0
            assert st.wire_max_occupancy[w.id] <= w.capacity
            producer = g.actors[w.src[0]]
            rate = producer.out_port(w.src[1]).rate
            assert st.wire_tokens[w.id] == st.emissions[producer.id] * rate
            assert st.wire_tokens[w.id] == 2 * w.frame_tokens


def test_determinism():
    for src, tp, ims in fuzz_cases(seed=33, count=20):
        g = lower(tp)
        a = simulate(g, ims, SimConfig(frames=2, trace=True))
        b = simulate(g, ims, SimConfig(frames=2, trace=True))
        assert a.outputs == b.outputs
        assert a.stats == b.stats
        assert a.trace == b.trace


@pytest.mark.parametrize("w,h,a,b", [(16, 8, 3, 3), (12, 10, 5, 3), (9, 9, 1, 7), (20, 4, 7, 1)])
def test_convolve_state_never_exceeds_line_buffers(rng, w, h, a, b):
    src = f"in x : image<{w},{h}>;\nlet c = convolve(x, ({a}, {b}), \\w -> w[0]);\nlet m = mapCol(c, 1, \\v -> v);\nout m;\n"
    tp, g = build(src)
    im = random_image(rng, w, h)
    res = simulate(g, {"x": im}, SimConfig(frames=2))
    bound = (b - 1) * w + a
    assert res.stats.peak_state["c"] == bound == g.actors["c"].state
    assert res.outputs["m"] == [run_reference(tp, {"x": im})["m"]] * 2


def test_transpose_peak_is_frame(rng):
    _, g = build("in x : image<6,4>;\nlet a = mapCol(x, 2, \\v -> v);\nout a;\n")
    res = simulate(g, {"x": random_image(rng, 6, 4)}, SimConfig(frames=3))
    (t,) = g.transposes()
    assert res.stats.peak_state[t.id] == 24 == state_elements("Transpose", None, {}, 6, 4)


def test_capacity_one_counterexample_deadlocks(rng):
    _, g = build(DIAMOND)
    tight = force_depths(g, 1)
    with pytest.raises(Deadlock) as ei:
        simulate(tight, {"x": random_image(rng, 16, 8)})
    d = ei.value.diagnosis
    assert ei.value.code == "E_DEADLOCK"
    assert d.reasons["z"].startswith("input-starved on p1")
    assert d.reasons["m"].startswith("output-blocked")
    assert set(d.occupancy) == {w.id for w in tight.wires}
    assert d.tick < default_max_ticks(tight, 1)
    assert detect_deadlock(ei.value) is d
    text = d.format()
    assert "actor z: input-starved on p1" in text and "wire w0" in text


def test_default_depths_resolve_counterexample(rng):
    tp, g = build(DIAMOND)
    im = random_image(rng, 16, 8)
    res = simulate(g, {"x": im}, SimConfig(frames=2))
    assert res.outputs["z"] == [run_reference(tp, {"x": im})["z"]] * 2
    assert detect_deadlock(res) is None


def test_chunked_reconvergence_completes(rng):
    src = ("in x : image<10,9>;\n"
           "let b0 = combineRow(x, x, 5, 7, \\x y -> [x[0] - y[4], x[1] - y[3], max(x[2], y[2]), y[3], y[4], max(x[0], y[0]), x[1]]);\n"
           "let b1 = convolve(b0, (5, 1), \\w -> max(max(max(max(w[0], w[1]), w[2]), w[3]), w[4]));\n"
           "let b2 = combineRow(b0, b1, 7, 2, \\x y -> [(x[0] + y[1]) / 2, (x[1] + y[2]) / 2]);\nout b2;\n")
    tp, g = build(src)
    im = random_image(rng, 10, 9)
    assert simulate(g, {"x": im}).outputs["b2"] == [run_reference(tp, {"x": im})["b2"]]


def test_sources_joined_through_a_transpose_complete(rng):
    # two sources meet at c directly, and again at d after a transpose round trip
    src = ("in a : image<6,4>;\nin b : image<6,4>;\n"
           "let t = mapCol(a, 1, \\v -> v);\nlet d = zipWithRow(t, b, \\p q -> p - q);\n"
           "let c = zipWithRow(a, b, \\p q -> p + q);\nout c;\nout d;\n")
    tp, g = build(src)
    ims = images_for(tp, rng)
    res = simulate(g, ims, SimConfig(frames=2))
    ref = run_reference(tp, ims)
    assert res.outputs["c"] == [ref["c"]] * 2 and res.outputs["d"] == [ref["d"]] * 2


def test_frame_isolation(rng):
    src = ("in x : image<8,6>;\nlet c = convolve(x, (3, 3), \\w -> (w[0] + w[8]) / 2);\n"
           "let h = foldVector(x, 0, 4, \\p acc -> upd(acc, p % 4, acc[p % 4] + p));\nout c;\nout h;\n")
    _, g = build(src)
    f0 = random_image(rng, 8, 6)
    one = simulate(g, {"x": f0})
    many = simulate(g, {"x": [f0, random_image(rng, 8, 6), random_image(rng, 8, 6)]}, SimConfig(frames=3))
    assert many.outputs["c"][0] == one.outputs["c"][0]
    assert many.outputs["h"][0] == one.outputs["h"][0]


def test_fold_resets_each_frame():
    _, g = build("in x : image<4,4>;\nlet n = foldScalar(x, 5, \\p acc -> acc + 1);\nout n;\n")
    res = simulate(g, {"x": Image.constant(4, 4, 0)}, SimConfig(frames=3))
    assert res.outputs["n"] == [21, 21, 21]


def test_trace_format(rng):
    _, g = build("in x : image<2,1>;\nout x;\n")
    res = simulate(g, {"x": random_image(rng, 2, 1)}, SimConfig(trace=True))
    assert res.trace[0] == "tick 1: fired=[in:x] occ={w0:1}"
    assert res.trace[-1].startswith(f"tick {res.stats.ticks_elapsed}: fired=[")


def test_tick_limit(rng):
    _, g = build(chain(2, 8, 8))
    with pytest.raises(SimulationError) as ei:
        simulate(g, {"x": random_image(rng, 8, 8)}, SimConfig(max_ticks=10))
    assert ei.value.code == "E_TICK_LIMIT"


def test_divide_by_zero_names_actor_and_tick():
    _, g = build("in x : image<2,2>;\nlet d = mapRow(x, 1, \\v -> [255 / v[0]]);\nout d;\n")
    with pytest.raises(SimulationError) as ei:
        simulate(g, {"x": Image.from_rows([[1, 0], [1, 1]])})
    assert ei.value.code == "E_DIVZERO"
    assert re.search(r"actor d, tick \d+", ei.value.report())


def test_input_dims_checked(rng):
    _, g = build("in x : image<4,4>;\nout x;\n")
    with pytest.raises(SimulationError) as ei:
        simulate(g, {"x": random_image(rng, 4, 3)})
    assert ei.value.code == "E_INPUT_DIM"


def test_passthrough_pipeline_summary(rng):
    _, g = build("in x : image<4,4>;\nout x;\n")
    s = measure_pipeline(g, {"x": random_image(rng, 4, 4)})
    assert s.depth == 0
    assert 16 <= s.makespan <= 18


def test_eight_map_chain_bound(rng):
    _, g = build(chain(8, 16, 16))
    s = measure_pipeline(g, {"x": random_image(rng, 16, 16)})
    assert s.makespan <= 16 * 16 + 8 * 4
    assert s.baseline == 8 * 256


def test_inputs_per_frame_count_checked(rng):
    _, g = build("in x : image<2,2>;\nout x;\n")
    with pytest.raises(ValueError):
        simulate(g, {"x": [random_image(rng, 2, 2)] * 2}, SimConfig(frames=3))
