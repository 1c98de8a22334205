"""Lowering of typed programs to dataflow process networks.

One actor per skeleton instance, one Source per input and one Sink per
output. A producer gets one output port per consumer; every port carries
the same stream. Wires are point-to-point bounded FIFOs.
"""

from __future__ import annotations

import copy
import heapq
import math
from dataclasses import dataclass, field
from typing import Literal, Optional

from .ast import Kernel
from .errors import CompileError, Diagnostic
from .typesize import ImageType, KernelSig, TypedProgram, VectorType

Orientation = Literal["RowMajor", "ColMajor"]
ROW: Orientation = "RowMajor"
COL: Orientation = "ColMajor"

KINDS = ("Source", "Sink", "Map", "ConcatMap", "ZipWith", "Combine", "Convolve", "Fold", "Transpose")

SKELETON_KIND = {
    "mapRow": "Map", "mapCol": "Map",
    "concatMapRow": "ConcatMap", "concatMapCol": "ConcatMap",
    "zipWithRow": "ZipWith", "zipWithCol": "ZipWith",
    "combineRow": "Combine", "combineCol": "Combine",
    "convolve": "Convolve", "foldVector": "Fold", "foldScalar": "Fold",
}
COLUMN_WISE = {"mapCol", "concatMapCol", "zipWithCol", "combineCol"}
JOINS = ("ZipWith", "Combine")
DEFAULT_DEPTH = 8


def flip(o: Orientation) -> Orientation:
    return COL if o == ROW else ROW


@dataclass
class Port:
    name: str
    rate: int = 0


@dataclass
class Actor:
    id: str
    kind: str
    label: str  # program name (input, binding or output) this actor realises
    skeleton: Optional[str] = None
    inputs: list[Port] = field(default_factory=list)
    outputs: list[Port] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    kernel: Optional[Kernel] = None  # None with skeleton combine* means append
    sig: Optional[KernelSig] = None
    in_orient: Optional[Orientation] = None  # None: accepts either (Sinks)
    out_orient: Optional[Orientation] = None
    in_dims: Optional[tuple[int, int]] = None
    out_dims: Optional[tuple[int, int]] = None
    token: str = "Pixel"  # kind of token produced
    state: int = 0

    def in_port(self, name: str) -> Port:
        return next(p for p in self.inputs if p.name == name)

    def out_port(self, name: str) -> Port:
        return next(p for p in self.outputs if p.name == name)


@dataclass
class Wire:
    id: str
    src: tuple[str, str]
    dst: tuple[str, str]
    capacity: int
    orientation: Orientation
    token: str
    dims: tuple[int, int]  # (width, height) of the frame carried; (s, 1) for Int vectors

    @property
    def frame_tokens(self) -> int:
        return self.dims[0] * self.dims[1]


@dataclass(eq=False)
class DpnGraph:
    actors: dict[str, Actor] = field(default_factory=dict)
    wires: list[Wire] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, DpnGraph):
            return NotImplemented
        key = lambda w: w.id  # noqa: E731
        return self.actors == other.actors and sorted(self.wires, key=key) == sorted(other.wires, key=key)

    def add(self, actor: Actor) -> Actor:
        self.actors[actor.id] = actor
        return actor

    def wires_into(self, actor_id: str) -> list[Wire]:
        ws = [w for w in self.wires if w.dst[0] == actor_id]
        return sorted(ws, key=lambda w: _port_index(w.dst[1]))

    def wires_from(self, actor_id: str) -> list[Wire]:
        ws = [w for w in self.wires if w.src[0] == actor_id]
        return sorted(ws, key=lambda w: _port_index(w.src[1]))

    def wire(self, wire_id: str) -> Wire:
        return next(w for w in self.wires if w.id == wire_id)

    def topo_order(self) -> list[str]:
        """Topological actor order, ties broken by id. Raises ValueError on a cycle."""
        indeg = {a: 0 for a in self.actors}
        succ: dict[str, list[str]] = {a: [] for a in self.actors}
        for w in self.wires:
            if w.src[0] in indeg and w.dst[0] in indeg:
                indeg[w.dst[0]] += 1
                succ[w.src[0]].append(w.dst[0])
        heap = [a for a, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            a = heapq.heappop(heap)
            order.append(a)
            for b in succ[a]:
                indeg[b] -= 1
                if indeg[b] == 0:
                    heapq.heappush(heap, b)
        if len(order) != len(self.actors):
            raise ValueError("graph has a cycle")
        return order

    def transposes(self) -> list[Actor]:
        return [a for a in self.actors.values() if a.kind == "Transpose"]


def _port_index(name: str) -> int:
    return int(name[1:])


def _fresh_wire_id(g: DpnGraph) -> str:
    used = {int(w.id[1:]) for w in g.wires if w.id[1:].isdigit()}
    return f"w{max(used, default=-1) + 1}"


def _dims(t) -> tuple[int, int]:
    if isinstance(t, ImageType):
        return (t.width, t.height)
    if isinstance(t, VectorType):
        return (t.length, 1)
    return (1, 1)


def build_graph(tp: TypedProgram) -> DpnGraph:
    """Lift the implicit dataflow of ``tp`` into explicit actors and wires.

    Rates and depths are left unassigned (0); orientation mismatches are
    left in place for :func:`insert_orientation_adapters`.
    """
    from .memest import state_elements

    g = DpnGraph()
    producer: dict[str, Actor] = {}
    for name, t in tp.inputs.items():
        producer[name] = g.add(Actor(
            f"in:{name}", "Source", name, out_orient=ROW, out_dims=_dims(t), state=1))
    for tb in tp.bindings:
        kind = SKELETON_KIND[tb.skeleton]
        orient = COL if tb.skeleton in COLUMN_WISE else ROW
        in_dims = _dims(tb.in_types[0])
        a = Actor(
            tb.name, kind, tb.name, skeleton=tb.skeleton,
            inputs=[Port(f"p{i}") for i in range(len(tb.inputs))],
            params=dict(tb.params), kernel=tb.kernel, sig=tb.sig,
            in_orient=orient, out_orient=orient, in_dims=in_dims, out_dims=_dims(tb.out_type),
            token="Int" if kind == "Fold" else "Pixel",
        )
        a.state = state_elements(a.kind, a.skeleton, a.params, *in_dims)
        producer[tb.name] = g.add(a)
    sinks = []
    for name in tp.outputs:
        src = producer[name]
        t = tp.types[name]
        value = "image" if isinstance(t, ImageType) else "vector" if isinstance(t, VectorType) else "scalar"
        sinks.append(g.add(Actor(
            f"out:{name}", "Sink", name, inputs=[Port("p0")], params={"value": value},
            in_dims=src.out_dims, token=src.token, state=1)))

    uses: list[tuple[str, Actor, str]] = []
    for tb in tp.bindings:
        for i, name in enumerate(tb.inputs):
            uses.append((name, g.actors[tb.name], f"p{i}"))
    for name, sink in zip(tp.outputs, sinks):
        uses.append((name, sink, "p0"))
    for name, consumer, port in uses:
        src = producer[name]
        out = Port(f"p{len(src.outputs)}")
        src.outputs.append(out)
        g.wires.append(Wire(
            f"w{len(g.wires)}", (src.id, out.name), (consumer.id, port), 0,
            src.out_orient, src.token, src.out_dims))
    # a value nobody consumes would leave an actor with no output port at all
    decls = [(i.name, i.pos) for i in tp.program.inputs] + [(b.name, b.pos) for b in tp.program.bindings]
    dead = [Diagnostic("E_UNUSED", pos[0], pos[1], f"'{name}' is never used")
            for name, pos in decls if not producer[name].outputs]
    if dead:
        raise CompileError(dead)
    return g


def insert_orientation_adapters(g: DpnGraph) -> DpnGraph:
    """Splice a Transpose into every wire whose orientation the consumer rejects."""
    g = copy.deepcopy(g)
    count = len(g.transposes())
    for w in list(g.wires):
        consumer = g.actors[w.dst[0]]
        if consumer.in_orient is None or consumer.in_orient == w.orientation:
            continue
        t = g.add(Actor(
            f"tr:{count}", "Transpose", consumer.label,
            inputs=[Port("p0", 1)], outputs=[Port("p0", 1)],
            in_orient=w.orientation, out_orient=consumer.in_orient,
            in_dims=w.dims, out_dims=w.dims, state=w.dims[0] * w.dims[1]))
        count += 1
        old_dst = w.dst
        w.dst = (t.id, "p0")
        g.wires.append(Wire(
            _fresh_wire_id(g), (t.id, "p0"), old_dst, w.capacity,
            consumer.in_orient, w.token, w.dims))
    return g


def actor_rates(a: Actor) -> tuple[list[int], int]:
    """(consumption rate per input port, production rate) for an actor kind."""
    p = a.params
    if a.kind == "Map":
        return [p["A"]], p["A"]
    if a.kind == "ConcatMap":
        return [p["A"]], p["B"]
    if a.kind == "ZipWith":
        return [1, 1], 1
    if a.kind == "Combine":
        return [p["A"], p["A"]], p["B"]
    if a.kind == "Fold":
        return [1], p.get("s", 1)
    if a.kind == "Source":
        return [], 1
    return [1] * len(a.inputs), 1  # Convolve, Transpose, Sink


def assign_rates(g: DpnGraph) -> DpnGraph:
    g = copy.deepcopy(g)
    for a in g.actors.values():
        ins, out = actor_rates(a)
        for port, r in zip(a.inputs, ins):
            port.rate = r
        for port in a.outputs:
            port.rate = out
    return g


def warmup_latency(a: Actor) -> int:
    p = a.params
    if a.kind in ("Map", "ConcatMap", "Combine"):
        return p["A"]
    if a.kind == "ZipWith":
        return 1
    if a.kind == "Convolve":
        return (p["b"] - 1) * a.in_dims[0] + p["a"]
    if a.kind in ("Transpose", "Fold"):
        return a.in_dims[0] * a.in_dims[1]
    return 0


_ROOT = "<root>"


def assign_fifo_depths(g: DpnGraph, default_depth: int = DEFAULT_DEPTH) -> DpnGraph:
    """Give every wire ``default_depth`` slots (never fewer than
    ``prod + cons - gcd(prod, cons)``), then deepen the short side of each reconvergent fan-out/join
    pair so its total slack covers the latency difference plus one.
    """
    g = copy.deepcopy(g)
    for w in g.wires:
        prod = g.actors[w.src[0]].out_port(w.src[1]).rate
        cons = g.actors[w.dst[0]].in_port(w.dst[1]).rate
        # smallest capacity that cannot deadlock a lone producer/consumer pair
        w.capacity = max(default_depth, prod + cons - math.gcd(prod, cons), 1)

    order = g.topo_order()
    rank = {a: i for i, a in enumerate(order)}
    incoming: dict[str, list[Wire]] = {a: [] for a in g.actors}
    for w in g.wires:
        incoming[w.dst[0]].append(w)
    fanout = {a.id for a in g.actors.values() if len(a.outputs) >= 2}
    # every source is fed the same frame at the same time, so treat them as
    # children of one virtual root; joins of two sources then get balanced too
    sources = sorted(a.id for a in g.actors.values() if a.kind == "Source")
    if len(sources) >= 2:
        rank[_ROOT] = -1
        fanout.add(_ROOT)
        for sid in sources:
            incoming[sid].append(Wire("", (_ROOT, ""), (sid, ""), 0, "RowMajor", "", (0, 0)))

    def path_table(last: Wire) -> dict[str, tuple[int, int]]:
        # ancestor -> (min of latency + capacity excluding ``last``, max latency),
        # both counted over actors strictly between the ancestor and the join
        table = {last.src[0]: (0, 0)}
        frontier = [last.src[0]]
        seen = set(frontier)
        while frontier:  # gather ancestors
            x = frontier.pop()
            for e in incoming.get(x, ()):
                if e.src[0] not in seen:
                    seen.add(e.src[0])
                    frontier.append(e.src[0])
        for x in sorted(seen, key=rank.get, reverse=True):
            if x not in table:
                continue
            mn, mx = table[x]
            lat = warmup_latency(g.actors[x]) if x != _ROOT else 0
            for e in incoming.get(x, ()):
                cand = (mn + lat + e.capacity, mx + lat)
                y = e.src[0]
                if y in table:
                    table[y] = (min(table[y][0], cand[0]), max(table[y][1], cand[1]))
                else:
                    table[y] = cand
        return table

    for j in order:
        if g.actors[j].kind not in JOINS:
            continue
        ins = sorted(incoming[j], key=lambda w: _port_index(w.dst[1]))
        for side, other in ((0, 1), (1, 0)):
            short, long_ = path_table(ins[side]), path_table(ins[other])
            c_join = max(q.rate for q in g.actors[j].inputs)
            for u in sorted(set(short) & set(long_) & fanout, key=rank.get):
                # chunked producers/consumers overshoot by up to one chunk each
                p_fan = 1 if u == _ROOT else max(q.rate for q in g.actors[u].outputs)
                need = long_[u][1] + 1 - short[u][0] + (p_fan - 1) + (c_join - 1)
                if need > ins[side].capacity:
                    ins[side].capacity = need
    return g


def lower(tp: TypedProgram, default_depth: int = DEFAULT_DEPTH) -> DpnGraph:
    """build_graph -> insert_orientation_adapters -> assign_rates -> assign_fifo_depths."""
    g = build_graph(tp)
    g = insert_orientation_adapters(g)
    g = assign_rates(g)
    return assign_fifo_depths(g, default_depth)


def force_depths(g: DpnGraph, depth: int) -> DpnGraph:
    """Set every wire to ``depth`` slots, bypassing the depth policy."""
    g = copy.deepcopy(g)
    for w in g.wires:
        w.capacity = depth
    return g


# ---------------------------------------------------------------- validation

_IN_PORTS = {"Source": 0, "Sink": 1, "Map": 1, "ConcatMap": 1, "Convolve": 1,
             "Fold": 1, "Transpose": 1, "ZipWith": 2, "Combine": 2}


def validate_graph(g: DpnGraph) -> list[str]:
    """Return every well-formedness violation; an empty list means the graph passes."""
    problems: list[str] = []
    for a in g.actors.values():
        if a.kind not in KINDS:
            problems.append(f"actor {a.id}: unknown kind {a.kind}")
            continue
        if len(a.inputs) != _IN_PORTS[a.kind]:
            problems.append(f"actor {a.id}: {a.kind} must have {_IN_PORTS[a.kind]} input ports, has {len(a.inputs)}")
        if a.kind == "Sink" and a.outputs:
            problems.append(f"actor {a.id}: Sink must have no output ports")
        if a.kind != "Sink" and not a.outputs:
            problems.append(f"actor {a.id}: unconnected port (no output ports)")
        for p in a.inputs + a.outputs:
            if not isinstance(p.rate, int) or p.rate < 1:
                problems.append(f"actor {a.id}: port {p.name} has non-positive rate {p.rate}")

    into: dict[tuple[str, str], int] = {}
    out_of: dict[tuple[str, str], int] = {}
    for w in g.wires:
        src, dst = g.actors.get(w.src[0]), g.actors.get(w.dst[0])
        if src is None or w.src[1] not in {p.name for p in src.outputs}:
            problems.append(f"wire {w.id}: unknown source {w.src[0]}.{w.src[1]}")
            continue
        if dst is None or w.dst[1] not in {p.name for p in dst.inputs}:
            problems.append(f"wire {w.id}: unknown destination {w.dst[0]}.{w.dst[1]}")
            continue
        into[w.dst] = into.get(w.dst, 0) + 1
        out_of[w.src] = out_of.get(w.src, 0) + 1
        if w.capacity < 1:
            problems.append(f"wire {w.id}: capacity {w.capacity} < 1")
        if w.orientation != src.out_orient:
            problems.append(f"wire {w.id}: orientation {w.orientation} differs from producer {src.id} ({src.out_orient})")
        if dst.in_orient is not None and w.orientation != dst.in_orient:
            problems.append(f"wire {w.id}: orientation mismatch, {dst.id} requires {dst.in_orient}, wire carries {w.orientation}")
        prod = src.out_port(w.src[1]).rate
        cons = dst.in_port(w.dst[1]).rate
        if prod >= 1 and w.frame_tokens % prod:
            problems.append(f"wire {w.id}: production rate {prod} does not divide frame of {w.frame_tokens} tokens")
        if cons >= 1 and w.frame_tokens % cons:
            problems.append(f"wire {w.id}: consumption rate {cons} does not divide frame of {w.frame_tokens} tokens")

    for a in g.actors.values():
        for p in a.inputs:
            n = into.get((a.id, p.name), 0)
            if n != 1:
                problems.append(f"actor {a.id}: unconnected port {p.name}" if n == 0
                                else f"actor {a.id}: input port {p.name} has {n} incoming wires")
        for p in a.outputs:
            n = out_of.get((a.id, p.name), 0)
            if n != 1:
                problems.append(f"actor {a.id}: unconnected port {p.name}" if n == 0
                                else f"actor {a.id}: output port {p.name} has {n} outgoing wires")

    try:
        g.topo_order()
    except ValueError:
        problems.append("cycle")

    # every actor must lie on some Source -> Sink path
    succ: dict[str, set[str]] = {a: set() for a in g.actors}
    pred: dict[str, set[str]] = {a: set() for a in g.actors}
    for w in g.wires:
        if w.src[0] in succ and w.dst[0] in succ:
            succ[w.src[0]].add(w.dst[0])
            pred[w.dst[0]].add(w.src[0])

    def reach(starts, nxt):
        seen, stack = set(starts), list(starts)
        while stack:
            for b in nxt[stack.pop()]:
                if b not in seen:
                    seen.add(b)
                    stack.append(b)
        return seen

    fed = reach([a.id for a in g.actors.values() if a.kind == "Source"], succ)
    drained = reach([a.id for a in g.actors.values() if a.kind == "Sink"], pred)
    for a in g.actors:
        if a not in fed or a not in drained:
            problems.append(f"actor {a}: not connected to both a Source and a Sink")
    return problems
