"""DOT and actor-IR serialisation of dataflow graphs.

The actor IR is a line-oriented, CAL-flavoured text format that records
everything the simulator needs, so ``read_actor_ir(emit_actor_ir(g)) == g``.
"""

from __future__ import annotations

import re

from . import __version__
from .ast import pretty_kernel
from .dpn import Actor, DpnGraph, Port, Wire, _port_index
from .frontend import parse_kernel
from .typesize import KernelSig, ScalarType, VectorType


def _edge_order(g: DpnGraph) -> list[Wire]:
    rank = {a: i for i, a in enumerate(g.topo_order())}
    return sorted(g.wires, key=lambda w: (rank[w.src[0]], _port_index(w.src[1]), rank[w.dst[0]], w.id))


def emit_dot(g: DpnGraph) -> str:
    lines = ["digraph ripl {", "  rankdir=LR;", "  node [shape=box];"]
    for aid in g.topo_order():
        a = g.actors[aid]
        lines.append(f'  "{aid}" [label="{a.kind}\\n{aid}\\nstate={a.state}"];')
    for w in _edge_order(g):
        lines.append(f'  "{w.src[0]}" -> "{w.dst[0]}" [label="depth={w.capacity} {w.orientation}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- actor IR


def _dims(d) -> str:
    return "-" if d is None else f"{d[0]}x{d[1]}"


def emit_actor_ir(g: DpnGraph) -> str:
    lines = ["ripl-ir 1", f"tool riplc {__version__}"]
    order = g.topo_order()
    for aid in order:
        a = g.actors[aid]
        if a.kind == "Source":
            lines.append(f"frame {aid} {a.out_dims[0]} {a.out_dims[1]}")
    for aid in order:
        a = g.actors[aid]
        lines.append(f"actor {aid} : {a.kind}")
        lines.append(f"  label {a.label}")
        if a.skeleton:
            lines.append(f"  skeleton {a.skeleton}")
        for k, v in a.params.items():
            lines.append(f"  param {k} {v}")
        if a.sig is not None:
            lines.append(f"  sig {a.sig}")
        for p in a.inputs:
            lines.append(f"  in {p.name} rate {p.rate}")
        for p in a.outputs:
            suffix = " per-frame" if a.kind == "Fold" else ""
            lines.append(f"  out {p.name} rate {p.rate}{suffix}")
        lines.append(f"  orient {a.in_orient or '-'} {a.out_orient or '-'}")
        lines.append(f"  dims {_dims(a.in_dims)} {_dims(a.out_dims)}")
        lines.append(f"  token {a.token}")
        lines.append(f"  state {a.state}")
        if a.kernel is not None:
            lines.append(f"  fire {{ {pretty_kernel(a.kernel)} }}")
        elif a.skeleton and a.skeleton.startswith("combine"):
            lines.append("  fire { append }")
        lines.append("end")
    for w in _edge_order(g):
        lines.append(
            f"wire {w.src[0]}.{w.src[1]} -> {w.dst[0]}.{w.dst[1]} depth {w.capacity} "
            f"id={w.id} orient={w.orientation} token={w.token} dims={_dims(w.dims)}")
    return "\n".join(lines) + "\n"


class IrError(ValueError):
    pass


def _parse_dims(text: str):
    if text == "-":
        return None
    w, h = text.split("x")
    return (int(w), int(h))


def _parse_type(text: str):
    m = re.fullmatch(r"\[(P|Int)\]_(\d+)", text)
    if m:
        return VectorType(int(m.group(2)), m.group(1))
    if text in ("P", "Int"):
        return ScalarType(text)
    raise IrError(f"bad type {text!r}")


def _param_value(text: str):
    return int(text) if re.fullmatch(r"-?\d+", text) else text


_WIRE_RE = re.compile(
    r"wire (\S+)\.(p\d+) -> (\S+)\.(p\d+) depth (\d+) id=(\S+) orient=(\S+) token=(\S+) dims=(\S+)")


def read_actor_ir(text: str) -> DpnGraph:
    """Parse the output of :func:`emit_actor_ir` back into a graph."""
    g = DpnGraph()
    lines = text.splitlines()
    if not lines or lines[0] != "ripl-ir 1":
        raise IrError("missing 'ripl-ir 1' header")
    cur: Actor | None = None
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith(("tool ", "frame ")):
            continue
        if cur is None:
            if line.startswith("actor "):
                m = re.fullmatch(r"actor (\S+) : (\w+)", line)
                if not m:
                    raise IrError(f"line {n}: bad actor header")
                cur = Actor(m.group(1), m.group(2), "")
            elif line.startswith("wire "):
                m = _WIRE_RE.fullmatch(line)
                if not m:
                    raise IrError(f"line {n}: bad wire record")
                g.wires.append(Wire(
                    m.group(6), (m.group(1), m.group(2)), (m.group(3), m.group(4)),
                    int(m.group(5)), m.group(7), m.group(8), _parse_dims(m.group(9))))
            else:
                raise IrError(f"line {n}: unexpected {line!r}")
            continue
        body = line.strip()
        key, _, rest = body.partition(" ")
        if key == "end":
            g.add(cur)
            cur = None
        elif key == "label":
            cur.label = rest
        elif key == "skeleton":
            cur.skeleton = rest
        elif key == "param":
            k, v = rest.split(" ", 1)
            cur.params[k] = _param_value(v)
        elif key == "sig":
            parts = [_parse_type(t) for t in rest.split(" -> ")]
            cur.sig = KernelSig(tuple(parts[:-1]), parts[-1])
        elif key in ("in", "out"):
            m = re.fullmatch(r"(p\d+) rate (\d+)( per-frame)?", rest)
            if not m:
                raise IrError(f"line {n}: bad port record")
            (cur.inputs if key == "in" else cur.outputs).append(Port(m.group(1), int(m.group(2))))
        elif key == "orient":
            i, o = rest.split()
            cur.in_orient = None if i == "-" else i
            cur.out_orient = None if o == "-" else o
        elif key == "dims":
            i, o = rest.split()
            cur.in_dims, cur.out_dims = _parse_dims(i), _parse_dims(o)
        elif key == "token":
            cur.token = rest
        elif key == "state":
            cur.state = int(rest)
        elif key == "fire":
            m = re.fullmatch(r"\{ (.*) \}", rest)
            if not m:
                raise IrError(f"line {n}: bad fire rule")
            cur.kernel = None if m.group(1) == "append" else parse_kernel(m.group(1))
        else:
            raise IrError(f"line {n}: unknown actor field {key!r}")
    if cur is not None:
        raise IrError("unterminated actor record")
    return g
