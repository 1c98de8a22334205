"""On-chip memory estimates with a LUT/BRAM split and a budget verdict.

Conventions (configurable, not device data): a buffer of at most
``lut_threshold`` elements maps to LUTs, anything larger to BRAM; pixels
take 1 byte and Int accumulator elements 8 bytes. FIFOs are charged to
the actor that produces into them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .dpn import Actor, DpnGraph

LUT_THRESHOLD = 512
# 8.5 MB of block RAM on a Virtex-7
DEFAULT_BUDGET = 8_912_896
TOKEN_BYTES = {"Pixel": 1, "Int": 8}


def state_elements(kind: str, skeleton: str | None, params: dict, width: int, height: int) -> int:
    """Internal buffer size in elements for an actor reading Im(width, height)."""
    if kind in ("Map", "ConcatMap"):
        return params["A"]
    if kind == "ZipWith":
        return 2
    if kind == "Combine":
        return 2 * params["A"]
    if kind == "Convolve":
        return (params["b"] - 1) * width + params["a"]
    if kind == "Transpose":
        return width * height
    if kind == "Fold":
        return params["s"] if skeleton == "foldVector" else 1
    return 1  # Source, Sink


def classify(elements: int, lut_threshold: int = LUT_THRESHOLD) -> str:
    return "LUT" if elements <= lut_threshold else "BRAM"


@dataclass(frozen=True)
class Buffer:
    elements: int
    bytes: int
    cls: str


def estimate_actor_memory(a: "Actor", width: int, height: int, lut_threshold: int = LUT_THRESHOLD) -> Buffer:
    elements = state_elements(a.kind, a.skeleton, a.params, width, height)
    if a.kind == "Fold":
        size = TOKEN_BYTES["Int"]
    elif a.kind == "Sink":
        size = TOKEN_BYTES[a.token]
    else:
        size = TOKEN_BYTES["Pixel"]
    return Buffer(elements, elements * size, classify(elements, lut_threshold))


@dataclass
class ActorMemory:
    id: str
    kind: str
    state: Buffer
    fifos: dict[str, Buffer] = field(default_factory=dict)

    @property
    def fifo_elements(self) -> int:
        return sum(b.elements for b in self.fifos.values())

    @property
    def fifo_bytes(self) -> int:
        return sum(b.bytes for b in self.fifos.values())


@dataclass
class MemReport:
    actors: list[ActorMemory]
    budget: int
    lut_threshold: int

    def _buffers(self):
        for a in self.actors:
            yield a.state
            yield from a.fifos.values()

    @property
    def lut_bytes(self) -> int:
        return sum(b.bytes for b in self._buffers() if b.cls == "LUT")

    @property
    def bram_bytes(self) -> int:
        return sum(b.bytes for b in self._buffers() if b.cls == "BRAM")

    @property
    def fits(self) -> bool:
        return self.bram_bytes <= self.budget

    @property
    def overage(self) -> int:
        return max(0, self.bram_bytes - self.budget)

    def actor(self, actor_id: str) -> ActorMemory:
        return next(a for a in self.actors if a.id == actor_id)

    def header(self) -> str:
        return (f"# memory estimate: lut_threshold={self.lut_threshold} elements, "
                "1 B/pixel, 8 B/Int (estimator conventions, not device data)")

    def to_keyvalue(self) -> str:
        lines = [self.header()]
        for a in self.actors:
            p = f"actor.{a.id}"
            lines += [
                f"{p}.kind={a.kind}",
                f"{p}.elements={a.state.elements}",
                f"{p}.bytes={a.state.bytes}",
                f"{p}.class={a.state.cls}",
                f"{p}.fifo_elements={a.fifo_elements}",
                f"{p}.fifo_bytes={a.fifo_bytes}",
            ]
            for wid, b in a.fifos.items():
                lines += [f"wire.{wid}.elements={b.elements}", f"wire.{wid}.bytes={b.bytes}",
                          f"wire.{wid}.class={b.cls}"]
        lines += [
            f"total.lut_bytes={self.lut_bytes}",
            f"total.bram_bytes={self.bram_bytes}",
            f"budget.bytes={self.budget}",
            f"verdict={'fits' if self.fits else 'exceeds'}",
            f"overage.bytes={self.overage}",
        ]
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        head = f"{'actor':<16} {'kind':<10} {'state':>9} {'bytes':>9} {'class':<5} {'fifo B':>8}"
        rows = [self.header(), head, "-" * len(head)]
        for a in self.actors:
            rows.append(f"{a.id:<16} {a.kind:<10} {a.state.elements:>9} {a.state.bytes:>9} "
                        f"{a.state.cls:<5} {a.fifo_bytes:>8}")
        rows.append("-" * len(head))
        rows.append(f"LUT total {self.lut_bytes} B; BRAM total {self.bram_bytes} B; budget {self.budget} B")
        if self.fits:
            rows.append("verdict: fits")
        else:
            rows.append(f"verdict: exceeds budget by {self.overage} B")
        return "\n".join(rows) + "\n"


def estimate_design(g: "DpnGraph", budget_bytes: int = DEFAULT_BUDGET,
                    lut_threshold: int = LUT_THRESHOLD) -> MemReport:
    actors = []
    for aid in g.topo_order():
        a = g.actors[aid]
        w, h = a.in_dims or a.out_dims
        am = ActorMemory(a.id, a.kind, estimate_actor_memory(a, w, h, lut_threshold))
        for wire in g.wires_from(aid):
            n = wire.capacity
            am.fifos[wire.id] = Buffer(n, n * TOKEN_BYTES[wire.token], classify(n, lut_threshold))
        actors.append(am)
    return MemReport(actors, budget_bytes, lut_threshold)
