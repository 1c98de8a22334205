"""Tick-level simulation of a dataflow network over bounded FIFOs.

Timing model: at each tick every enabled actor fires at most once, and
every firing decision reads the FIFO occupancies as they stood at the
start of the tick. A token pushed at tick t is visible at tick t+1.

Static-rate actors (Source, Sink, Map, ConcatMap, ZipWith, Combine) fire
when each input holds its consumption rate and each output has room for
its production rate. Convolve, Transpose and Fold carry internal state;
within one firing they may emit (from tick-start state) and then consume.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .dpn import COL, DpnGraph, Wire, warmup_latency
from .errors import Diagnostic, EvalError, RiplError
from .image import Image
from .kernels import compile_kernel


class SimulationError(RiplError):
    pass


@dataclass
class SimConfig:
    frames: int = 1
    max_ticks: int | None = None
    trace: bool = False

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.max_ticks is not None and self.max_ticks < 1:
            raise ValueError("max_ticks must be >= 1")


@dataclass
class SimStats:
    ticks_elapsed: int
    firings: dict[str, int]
    emissions: dict[str, int]
    peak_state: dict[str, int]
    wire_tokens: dict[str, int]
    wire_consumed: dict[str, int]
    wire_max_occupancy: dict[str, int]
    wire_capacity: dict[str, int]
    wire_residual: dict[str, int]
    sink_frame_ticks: dict[str, list[int]]
    sink_token_ticks: dict[str, list[int]] = field(repr=False, default_factory=dict)

    def to_text(self) -> str:
        lines = [f"ticks={self.ticks_elapsed}"]
        for a in self.firings:
            lines += [f"actor.{a}.firings={self.firings[a]}",
                      f"actor.{a}.emissions={self.emissions[a]}",
                      f"actor.{a}.peak_state={self.peak_state[a]}"]
        for w in self.wire_tokens:
            lines += [f"wire.{w}.tokens={self.wire_tokens[w]}",
                      f"wire.{w}.max_occupancy={self.wire_max_occupancy[w]}",
                      f"wire.{w}.capacity={self.wire_capacity[w]}"]
        for s, ticks in self.sink_frame_ticks.items():
            lines.append(f"sink.{s}.frame_ticks={','.join(map(str, ticks))}")
        return "\n".join(lines) + "\n"


@dataclass
class Diagnosis:
    tick: int
    reasons: dict[str, str]
    occupancy: dict[str, tuple[int, int]]
    wires: dict[str, str]

    def format(self) -> str:
        lines = [f"deadlock at tick {self.tick}: no actor can fire and sinks are incomplete"]
        lines += [f"  actor {a}: {r}" for a, r in self.reasons.items()]
        lines += [f"  wire {w} {self.wires[w]}: {n}/{c}" for w, (n, c) in self.occupancy.items()]
        return "\n".join(lines)


class Deadlock(SimulationError):
    def __init__(self, diagnosis: Diagnosis):
        self.diagnosis = diagnosis
        blocked = [a for a, r in diagnosis.reasons.items() if "starved" in r or "blocked" in r]
        super().__init__(Diagnostic("E_DEADLOCK", 0, 0, f"deadlock at tick {diagnosis.tick}; blocked: {', '.join(blocked)}"))


@dataclass
class SimResult:
    outputs: dict[str, list]
    stats: SimStats
    trace: list[str]


def _px(v: int) -> int:
    return 0 if v < 0 else 255 if v > 255 else v


# ---------------------------------------------------------------- runtimes


class _Net:
    """FIFO storage shared by all actor runtimes of one run."""

    def __init__(self, wires: list[Wire]):
        self.ids = [w.id for w in wires]
        self.queues = [deque() for _ in wires]
        self.caps = [w.capacity for w in wires]
        self.start = [0] * len(wires)
        self.pushed = [0] * len(wires)
        self.popped = [0] * len(wires)


class _Actor:
    def __init__(self, actor, net: _Net, ins: list[int], outs: list[int]):
        self.a = actor
        self.id = actor.id
        self.net = net
        self.ins = ins
        self.outs = outs
        self.firings = 0
        self.emissions = 0
        self.peak = 0

    def room(self, n: int) -> bool:
        net = self.net
        for w in self.outs:
            if net.caps[w] - net.start[w] < n:
                return False
        return True

    def push(self, values) -> None:
        net = self.net
        for w in self.outs:
            net.queues[w].extend(values)
            net.pushed[w] += len(values)
        self.emissions += 1

    def pop(self, w: int, n: int) -> list[int]:
        net = self.net
        q = net.queues[w]
        net.popped[w] += n
        if n == 1:
            return [q.popleft()]
        return [q.popleft() for _ in range(n)]

    def have(self, w: int, n: int) -> bool:
        return self.net.start[w] >= n

    def done(self) -> bool:
        return False

    def _wire(self, w: int) -> str:
        net = self.net
        return f"{net.ids[w]} {net.start[w]}/{net.caps[w]}"

    def _starved(self, rates: list[int]) -> str | None:
        for port, (w, r) in enumerate(zip(self.ins, rates)):
            if self.net.start[w] < r:
                return f"input-starved on p{port} (wire {self._wire(w)}, needs {r})"
        return None

    def _blocked(self, n: int) -> str | None:
        for port, w in enumerate(self.outs):
            if self.net.caps[w] - self.net.start[w] < n:
                return f"output-blocked on p{port} (wire {self._wire(w)}, needs {n} free)"
        return None

    def reason(self) -> str:
        raise NotImplementedError


class _Source(_Actor):
    def __init__(self, actor, net, ins, outs, frames: list[tuple[int, ...]]):
        super().__init__(actor, net, ins, outs)
        self.stream = [p for f in frames for p in f]
        self.i = 0

    def fire(self, tick):
        if self.i < len(self.stream) and self.room(1):
            self.push((self.stream[self.i],))
            self.i += 1
            self.firings += 1
            self.peak = 1
            return True
        return False

    def done(self):
        return self.i == len(self.stream)

    def reason(self):
        return "finished" if self.done() else self._blocked(1) or "idle"


class _Sink(_Actor):
    def __init__(self, actor, net, ins, outs, frames: int, tick_log: list[int]):
        super().__init__(actor, net, ins, outs)
        self.per_frame = actor.in_dims[0] * actor.in_dims[1]
        self.total = frames * self.per_frame
        self.tokens: list[int] = []
        self.frame_ticks: list[int] = []
        self.tick_log = tick_log

    def fire(self, tick):
        w = self.ins[0]
        if len(self.tokens) < self.total and self.net.start[w] >= 1:
            self.tokens.append(self.pop(w, 1)[0])
            self.tick_log.append(tick)
            if len(self.tokens) % self.per_frame == 0:
                self.frame_ticks.append(tick)
            self.firings += 1
            self.peak = 1
            return True
        return False

    def done(self):
        return len(self.tokens) == self.total

    def reason(self):
        return "complete" if self.done() else self._starved([1]) or "idle"


class _ChunkActor(_Actor):
    """Map, ConcatMap: consume A, produce B."""

    def __init__(self, actor, net, ins, outs):
        super().__init__(actor, net, ins, outs)
        self.A = actor.params["A"]
        self.B = actor.params.get("B", self.A)
        self.fn = compile_kernel(actor.kernel)

    def fire(self, tick):
        w = self.ins[0]
        if self.net.start[w] >= self.A and self.room(self.B):
            out = self.fn(tuple(self.pop(w, self.A)))
            self.push([_px(v) for v in out])
            self.firings += 1
            self.peak = self.A
            return True
        return False

    def reason(self):
        return self._starved([self.A]) or self._blocked(self.B) or "idle"


class _Zip(_Actor):
    def __init__(self, actor, net, ins, outs):
        super().__init__(actor, net, ins, outs)
        self.fn = compile_kernel(actor.kernel)

    def fire(self, tick):
        w0, w1 = self.ins
        start = self.net.start
        if start[w0] >= 1 and start[w1] >= 1 and self.room(1):
            a = self.pop(w0, 1)[0]
            b = self.pop(w1, 1)[0]
            self.push((_px(self.fn(a, b)),))
            self.firings += 1
            self.peak = 2
            return True
        return False

    def reason(self):
        return self._starved([1, 1]) or self._blocked(1) or "idle"


class _Combine(_Actor):
    def __init__(self, actor, net, ins, outs):
        super().__init__(actor, net, ins, outs)
        self.A = actor.params["A"]
        self.B = actor.params["B"]
        self.fn = compile_kernel(actor.kernel) if actor.kernel is not None else None

    def fire(self, tick):
        w0, w1 = self.ins
        start = self.net.start
        if start[w0] >= self.A and start[w1] >= self.A and self.room(self.B):
            c1 = tuple(self.pop(w0, self.A))
            c2 = tuple(self.pop(w1, self.A))
            out = c1 + c2 if self.fn is None else self.fn(c1, c2)
            self.push([_px(v) for v in out])
            self.firings += 1
            self.peak = 2 * self.A
            return True
        return False

    def reason(self):
        return self._starved([self.A, self.A]) or self._blocked(self.B) or "idle"


class _Convolve(_Actor):
    """Line-buffered sliding window with replicate padding.

    Holds at most (b-1)*M + a pixels of the current frame in a ring indexed
    by stream position.
    """

    def __init__(self, actor, net, ins, outs):
        super().__init__(actor, net, ins, outs)
        self.fn = compile_kernel(actor.kernel)
        self.M, self.N = actor.in_dims
        self.wa, self.wb = actor.params["a"], actor.params["b"]
        self.ha, self.hb = self.wa // 2, self.wb // 2
        self.cap = (self.wb - 1) * self.M + self.wa
        self.ring = [0] * self.cap
        self.total = self.M * self.N
        self.n_in = 0
        self.n_out = 0

    def _need(self, n: int) -> int:
        x, y = n % self.M, n // self.M
        return min(y + self.hb, self.N - 1) * self.M + min(x + self.ha, self.M - 1)

    def _oldest(self, n: int) -> int:
        # earliest stream index any output from n onwards still reads; near
        # the top border the next row reaches back further than this one
        x, y = n % self.M, n // self.M
        first = max(y - self.hb, 0) * self.M + max(x - self.ha, 0)
        if y + 1 < self.N:
            first = min(first, max(y + 1 - self.hb, 0) * self.M)
        return first

    def fire(self, tick):
        fired = False
        M, N, cap, ring = self.M, self.N, self.cap, self.ring
        if self.n_out < self.total and self._need(self.n_out) < self.n_in and self.room(1):
            x, y = self.n_out % M, self.n_out // M
            rows = [min(max(y + d, 0), N - 1) * M for d in range(-self.hb, self.hb + 1)]
            cols = [min(max(x + d, 0), M - 1) for d in range(-self.ha, self.ha + 1)]
            window = tuple(ring[(r + c) % cap] for r in rows for c in cols)
            self.push((_px(self.fn(window)),))
            self.n_out += 1
            fired = True
            if self.n_out == self.total:
                self.n_in = self.n_out = 0
        w = self.ins[0]
        if self.n_in < self.total and self.net.start[w] >= 1:
            lo = self._oldest(self.n_out)
            if self.n_in + 1 - lo <= cap:
                ring[self.n_in % cap] = self.pop(w, 1)[0]
                self.n_in += 1
                fired = True
                held = self.n_in - lo
                if held > self.peak:
                    self.peak = held
                    if held > cap:
                        raise AssertionError(f"{self.id}: line buffer holds {held} > {cap}")
        if fired:
            self.firings += 1
        return fired

    def reason(self):
        wants_out = self.n_out < self.total and self._need(self.n_out) < self.n_in
        if wants_out:
            return self._blocked(1) or "idle"
        return self._starved([1]) or "idle"


class _Transpose(_Actor):
    def __init__(self, actor, net, ins, outs):
        super().__init__(actor, net, ins, outs)
        M, N = actor.in_dims
        self.total = M * N
        if actor.in_orient == COL:
            # column-major in, row-major out
            self.perm = [x * N + y for y in range(N) for x in range(M)]
        else:
            self.perm = [y * M + x for x in range(M) for y in range(N)]
        self.buf = [0] * self.total
        self.filled = 0
        self.sent = 0
        self.emitting = False

    def fire(self, tick):
        fired = False
        if self.emitting and self.room(1):
            self.push((self.buf[self.perm[self.sent]],))
            self.sent += 1
            fired = True
            if self.sent == self.total:
                self.emitting = False
                self.filled = self.sent = 0
        w = self.ins[0]
        if not self.emitting and self.net.start[w] >= 1:
            self.buf[self.filled] = self.pop(w, 1)[0]
            self.filled += 1
            fired = True
            if self.filled > self.peak:
                self.peak = self.filled
            if self.filled == self.total:
                self.emitting = True
        if fired:
            self.firings += 1
        return fired

    def reason(self):
        if self.emitting:
            return self._blocked(1) or "idle"
        return self._starved([1]) or "idle"


class _Fold(_Actor):
    def __init__(self, actor, net, ins, outs):
        super().__init__(actor, net, ins, outs)
        self.fn = compile_kernel(actor.kernel)
        self.vector = actor.skeleton == "foldVector"
        self.s = actor.params.get("s", 1)
        self.init = actor.params["init"]
        self.total = actor.in_dims[0] * actor.in_dims[1]
        self.acc = self._fresh()
        self.count = 0
        self.pending = False
        self.peak = self.s

    def _fresh(self):
        return (self.init,) * self.s if self.vector else self.init

    def fire(self, tick):
        fired = False
        if self.pending and self.room(self.s):
            self.push(list(self.acc) if self.vector else (self.acc,))
            self.acc = self._fresh()
            self.count = 0
            self.pending = False
            fired = True
        w = self.ins[0]
        if not self.pending and self.net.start[w] >= 1:
            self.acc = self.fn(self.pop(w, 1)[0], self.acc)
            self.count += 1
            fired = True
            if self.count == self.total:
                self.pending = True
        if fired:
            self.firings += 1
        return fired

    def reason(self):
        if self.pending:
            return self._blocked(self.s) or "idle"
        return self._starved([1]) or "idle"


_RUNTIMES = {"Map": _ChunkActor, "ConcatMap": _ChunkActor, "ZipWith": _Zip, "Combine": _Combine,
             "Convolve": _Convolve, "Transpose": _Transpose, "Fold": _Fold}


# ---------------------------------------------------------------- driver


def _frames_for(value, frames: int) -> list[Image]:
    if isinstance(value, Image):
        return [value] * frames
    value = list(value)
    if len(value) != frames:
        raise ValueError(f"expected {frames} frames, got {len(value)}")
    return value


def default_max_ticks(g: DpnGraph, frames: int) -> int:
    tokens = max((w.frame_tokens for w in g.wires), default=1)
    warm = sum(warmup_latency(a) for a in g.actors.values())
    return 10 * frames * (tokens + warm) + 100


def _reassemble(actor, tokens: list[int], orientation: str):
    value = actor.params.get("value", "image")
    if value == "scalar":
        return tokens[0]
    if value == "vector":
        return tuple(tokens)
    M, N = actor.in_dims
    if orientation == COL:
        tokens = [tokens[x * N + y] for y in range(N) for x in range(M)]
    return Image(M, N, tuple(tokens))


def simulate(g: DpnGraph, inputs: Mapping[str, Image | Sequence[Image]], cfg: SimConfig | None = None) -> SimResult:
    """Stream ``cfg.frames`` frames through ``g``; return outputs per frame and statistics.

    ``inputs`` maps program input names to one Image (reused for every
    frame) or a sequence with one Image per frame.
    """
    cfg = cfg or SimConfig()
    net = _Net(g.wires)
    windex = {w.id: i for i, w in enumerate(g.wires)}
    order = g.topo_order()
    runtimes: list[_Actor] = []
    sinks: list[_Sink] = []
    tick_logs: dict[str, list[int]] = {}
    for aid in order:
        a = g.actors[aid]
        ins = [windex[w.id] for w in g.wires_into(aid)]
        outs = [windex[w.id] for w in g.wires_from(aid)]
        if a.kind == "Source":
            if a.label not in inputs:
                raise SimulationError(Diagnostic("E_INPUT_DIM", 0, 0, f"no image supplied for input '{a.label}'"))
            frames = _frames_for(inputs[a.label], cfg.frames)
            for im in frames:
                if (im.width, im.height) != a.out_dims:
                    raise SimulationError(Diagnostic(
                        "E_INPUT_DIM", 0, 0,
                        f"input '{a.label}' is declared Im({a.out_dims[0]},{a.out_dims[1]}) "
                        f"but the image is {im.width}x{im.height}"))
            rt = _Source(a, net, ins, outs, [im.pixels for im in frames])
        elif a.kind == "Sink":
            tick_logs[aid] = []
            rt = _Sink(a, net, ins, outs, cfg.frames, tick_logs[aid])
            sinks.append(rt)
        else:
            rt = _RUNTIMES[a.kind](a, net, ins, outs)
        runtimes.append(rt)

    max_ticks = cfg.max_ticks or default_max_ticks(g, cfg.frames)
    nwires = len(g.wires)
    max_occ = [0] * nwires
    queues, caps, start = net.queues, net.caps, net.start
    trace: list[str] = []
    tick = 0
    while not all(s.done() for s in sinks):
        if tick >= max_ticks:
            raise SimulationError(Diagnostic("E_TICK_LIMIT", 0, 0, f"simulation exceeded {max_ticks} ticks"))
        tick += 1
        for i in range(nwires):
            start[i] = len(queues[i])
        fired = []
        for rt in runtimes:
            try:
                if rt.fire(tick):
                    fired.append(rt.id)
            except EvalError as exc:
                d = exc.diagnostics[0]
                raise SimulationError(Diagnostic(
                    d.code, d.line, d.col, f"{d.message} (actor {rt.id}, tick {tick})")) from exc
        if not fired:
            raise Deadlock(Diagnosis(
                tick,
                {rt.id: rt.reason() for rt in runtimes},
                {net.ids[i]: (start[i], caps[i]) for i in range(nwires)},
                {w.id: f"{w.src[0]}.{w.src[1]} -> {w.dst[0]}.{w.dst[1]}" for w in g.wires},
            ))
        for i in range(nwires):
            n = len(queues[i])
            if n > max_occ[i]:
                if n > caps[i]:
                    raise AssertionError(f"wire {net.ids[i]} holds {n} > capacity {caps[i]}")
                max_occ[i] = n
        if cfg.trace:
            occ = ", ".join(f"{net.ids[i]}:{len(queues[i])}" for i in range(nwires))
            trace.append(f"tick {tick}: fired=[{', '.join(fired)}] occ={{{occ}}}")

    outputs: dict[str, list] = {}
    for s in sinks:
        w = g.wires_into(s.id)[0]
        outputs[s.a.label] = [
            _reassemble(s.a, s.tokens[f * s.per_frame:(f + 1) * s.per_frame], w.orientation)
            for f in range(cfg.frames)
        ]
    ids = net.ids
    stats = SimStats(
        ticks_elapsed=tick,
        firings={rt.id: rt.firings for rt in runtimes},
        emissions={rt.id: rt.emissions for rt in runtimes},
        peak_state={rt.id: rt.peak for rt in runtimes},
        wire_tokens={ids[i]: net.pushed[i] for i in range(nwires)},
        wire_consumed={ids[i]: net.popped[i] for i in range(nwires)},
        wire_max_occupancy={ids[i]: max_occ[i] for i in range(nwires)},
        wire_capacity={ids[i]: caps[i] for i in range(nwires)},
        wire_residual={ids[i]: len(queues[i]) for i in range(nwires)},
        sink_frame_ticks={s.id: list(s.frame_ticks) for s in sinks},
        sink_token_ticks=tick_logs,
    )
    return SimResult(outputs, stats, trace)


def detect_deadlock(result_or_error) -> Diagnosis | None:
    """Diagnosis of a failed run, or None when the run completed."""
    if isinstance(result_or_error, Deadlock):
        return result_or_error.diagnosis
    return None


@dataclass(frozen=True)
class PipelineSummary:
    fill_latency: int
    makespan: int
    throughput: float
    depth: int
    baseline: int

    @property
    def speedup(self) -> float:
        return self.baseline / self.makespan


def pipeline_depth(g: DpnGraph) -> int:
    """Processing actors on the longest Source-to-Sink path."""
    depth: dict[str, int] = {}
    for aid in g.topo_order():
        a = g.actors[aid]
        preds = [depth[w.src[0]] for w in g.wires_into(aid)]
        depth[aid] = max(preds, default=0) + (0 if a.kind in ("Source", "Sink") else 1)
    return max(depth.values(), default=0)


def measure_pipeline(g: DpnGraph, inputs, cfg: SimConfig | None = None) -> PipelineSummary:
    cfg = cfg or SimConfig()
    res = simulate(g, inputs, cfg)
    ticks = sorted(t for log in res.stats.sink_token_ticks.values() for t in log)
    n = len(ticks)
    lo, hi = math.ceil(0.25 * (n - 1)), math.floor(0.75 * (n - 1))
    span = ticks[hi] - ticks[lo]
    throughput = (hi - lo) / span if span > 0 else float(hi - lo or 1)
    frame = max(a.out_dims[0] * a.out_dims[1] for a in g.actors.values() if a.kind == "Source")
    k = pipeline_depth(g)
    return PipelineSummary(ticks[0], ticks[-1], throughput, k, max(k, 1) * cfg.frames * frame)
