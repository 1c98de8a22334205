"""``riplc``: compile, run and estimate RIPL programs from the shell.

Exit codes: 0 ok, 1 compile/semantic error (or simulator/oracle mismatch),
2 I/O error, 3 deadlock, 4 memory budget exceeded.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .dpn import DpnGraph, force_depths, lower, validate_graph
from .emit import emit_actor_ir, emit_dot
from .errors import RiplError
from .image import Image
from .imageio import load_pgm, save_pgm
from .memest import DEFAULT_BUDGET, LUT_THRESHOLD, estimate_design
from .oracle import run_reference
from .sim import Deadlock, SimConfig, simulate
from .typesize import TypedProgram, compile_source

EXIT_OK, EXIT_COMPILE, EXIT_IO, EXIT_DEADLOCK, EXIT_BUDGET = 0, 1, 2, 3, 4


@dataclass
class CliConfig:
    subcommand: str
    file: Path
    inputs: dict[str, list[Path]] = field(default_factory=dict)
    frames: int = 1
    emit: tuple[str, ...] = ()
    budget: int = DEFAULT_BUDGET
    lut_threshold: int = LUT_THRESHOLD
    out_dir: Path = Path(".")
    stats: bool = False
    trace: bool = False
    oracle: bool = False
    force_depth: int | None = None

    def __post_init__(self) -> None:
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


class _Exit(Exception):
    def __init__(self, code: int) -> None:
        self.code = code


def _color() -> bool:
    return os.environ.get("RIPLC_COLOR", "0") == "1"


def _err(text: str) -> None:
    if _color():
        text = "\n".join(
            line.replace("ERROR", "\x1b[31mERROR\x1b[0m", 1) if line.startswith("ERROR") else line
            for line in text.splitlines())
    print(text, file=sys.stderr)


def _read_source(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as e:
        _err(f"ERROR E_IO 0:0 cannot read {path}: {e.strerror or e}")
        raise _Exit(EXIT_IO)


def _front(cfg: CliConfig) -> tuple[TypedProgram, DpnGraph]:
    src = _read_source(cfg.file)
    try:
        tp = compile_source(src, image_outputs=False)
        g = lower(tp)
    except RiplError as e:
        _err(e.report())
        raise _Exit(EXIT_COMPILE)
    problems = validate_graph(g)
    if problems:  # a lowering bug rather than a user error, but still fatal
        for msg in problems:
            _err(f"ERROR E_GRAPH 0:0 {msg}")
        raise _Exit(EXIT_COMPILE)
    if cfg.force_depth is not None:
        g = force_depths(g, cfg.force_depth)
    return tp, g


def _mkdir(d: Path) -> None:
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        _err(f"ERROR E_IO 0:0 cannot create {d}: {e.strerror or e}")
        raise _Exit(EXIT_IO)


def _write(path: Path, data: str | bytes) -> None:
    try:
        if isinstance(data, str):
            path.write_text(data)
        else:
            path.write_bytes(data)
    except OSError as e:
        _err(f"ERROR E_IO 0:0 cannot write {path}: {e.strerror or e}")
        raise _Exit(EXIT_IO)


def _value_text(v) -> str:
    if isinstance(v, (tuple, list)):
        return " ".join(str(x) for x in v) + "\n"
    return f"{v}\n"


def cmd_compile(cfg: CliConfig) -> int:
    tp, g = _front(cfg)
    for b in tp.bindings:
        print(f"{b.name} : {b.out_type}")
    if cfg.emit:
        _mkdir(cfg.out_dir)
        stem = cfg.file.stem
        if "dot" in cfg.emit:
            _write(cfg.out_dir / f"{stem}.dot", emit_dot(g))
        if "ir" in cfg.emit:
            _write(cfg.out_dir / f"{stem}.ir", emit_actor_ir(g))
    return EXIT_OK


def _load_inputs(cfg: CliConfig, tp: TypedProgram) -> dict[str, list[Image]]:
    images: dict[str, list[Image]] = {}
    for name, paths in cfg.inputs.items():
        frames = []
        for p in paths:
            try:
                frames.append(load_pgm(p))
            except OSError as e:
                _err(f"ERROR E_IO 0:0 cannot read {p}: {e.strerror or e}")
                raise _Exit(EXIT_IO)
            except RiplError as e:
                _err(e.report())
                raise _Exit(EXIT_IO)
        images[name] = frames
    for name in tp.inputs:
        if name not in images:
            _err(f"ERROR E_INPUT 0:0 no --input given for '{name}'")
            raise _Exit(EXIT_COMPILE)
    for name in images:
        if name not in tp.inputs:
            _err(f"ERROR E_INPUT 0:0 program has no input named '{name}'")
            raise _Exit(EXIT_COMPILE)
    # fewer files than frames: cycle through the ones given
    return {n: [fs[i % len(fs)] for i in range(cfg.frames)] for n, fs in images.items()}


def cmd_run(cfg: CliConfig) -> int:
    tp, g = _front(cfg)
    inputs = _load_inputs(cfg, tp)
    try:
        res = simulate(g, inputs, SimConfig(frames=cfg.frames, trace=cfg.trace))
    except Deadlock as e:
        _err(e.report())
        _err(e.diagnosis.format())
        return EXIT_DEADLOCK
    except RiplError as e:
        _err(e.report())
        return EXIT_COMPILE

    _mkdir(cfg.out_dir)
    for name in sorted(res.outputs):
        for f, v in enumerate(res.outputs[name]):
            if isinstance(v, Image):
                try:
                    save_pgm(cfg.out_dir / f"{name}_f{f}.pgm", v)
                except OSError as e:
                    _err(f"ERROR E_IO 0:0 cannot write output {name}: {e.strerror or e}")
                    return EXIT_IO
            else:
                _write(cfg.out_dir / f"{name}_f{f}.txt", _value_text(v))
    if cfg.trace:
        _write(cfg.out_dir / "trace.txt", "\n".join(res.trace) + "\n")
    if cfg.stats:
        _write(cfg.out_dir / "stats.txt", res.stats.to_text())
        report = estimate_design(g, cfg.budget, cfg.lut_threshold)
        _write(cfg.out_dir / "memory.txt", report.to_keyvalue())

    if cfg.oracle:
        bad = []
        for f in range(cfg.frames):
            try:
                ref = run_reference(tp, {n: fs[f] for n, fs in inputs.items()})
            except RiplError as e:
                _err(e.report())
                return EXIT_COMPILE
            bad += [f"{n} frame {f}" for n in sorted(ref) if ref[n] != res.outputs[n][f]]
        if bad:
            for b in bad:
                _err(f"ERROR E_MISMATCH 0:0 simulator and oracle differ on {b}")
            return EXIT_COMPILE
        print(f"oracle: {len(res.outputs)} output(s) x {cfg.frames} frame(s) match")
    print(f"ticks={res.stats.ticks_elapsed}")
    return EXIT_OK


def cmd_estimate(cfg: CliConfig) -> int:
    _, g = _front(cfg)
    report = estimate_design(g, cfg.budget, cfg.lut_threshold)
    print(report.table())
    _mkdir(cfg.out_dir)
    _write(cfg.out_dir / f"{cfg.file.stem}.mem", report.to_keyvalue())
    return EXIT_OK if report.fits else EXIT_BUDGET


def _parse_inputs(items: list[str]) -> dict[str, list[Path]]:
    out: dict[str, list[Path]] = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise argparse.ArgumentTypeError(f"--input expects name=file.pgm, got '{item}'")
        out.setdefault(name, []).append(Path(path))
    return out


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riplc", description="RIPL to dataflow compiler and simulator")
    ap.add_argument("--version", action="version", version=f"riplc {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    c = sub.add_parser("compile", help="check, type and lower a program")
    c.add_argument("file", type=Path)
    c.add_argument("--emit", choices=("dot", "ir", "both"))
    c.add_argument("-o", "--out-dir", type=Path, default=Path("."))

    r = sub.add_parser("run", help="simulate a program on PGM inputs")
    r.add_argument("file", type=Path)
    r.add_argument("--input", action="append", default=[], metavar="NAME=FILE.pgm")
    r.add_argument("--frames", type=_positive, default=1)
    r.add_argument("--stats", action="store_true")
    r.add_argument("--trace", action="store_true")
    r.add_argument("--oracle", action="store_true")
    r.add_argument("--budget", type=_nonneg, default=DEFAULT_BUDGET)
    r.add_argument("--lut-threshold", type=_nonneg, default=LUT_THRESHOLD)
    # test hook: override every FIFO depth after lowering
    r.add_argument("--force-depth", type=_positive, default=None, help=argparse.SUPPRESS)
    r.add_argument("-o", "--out-dir", type=Path, default=Path("."))

    e = sub.add_parser("estimate", help="report on-chip memory use")
    e.add_argument("file", type=Path)
    e.add_argument("--budget", type=_nonneg, default=DEFAULT_BUDGET)
    e.add_argument("--lut-threshold", type=_nonneg, default=LUT_THRESHOLD)
    e.add_argument("-o", "--out-dir", type=Path, default=Path("."))
    return ap


def parse_config(argv: list[str] | None = None) -> CliConfig:
    ns = build_parser().parse_args(argv)
    emit = {"dot": ("dot",), "ir": ("ir",), "both": ("dot", "ir"), None: ()}
    try:
        inputs = _parse_inputs(getattr(ns, "input", []))
    except argparse.ArgumentTypeError as exc:
        build_parser().error(str(exc))
    return CliConfig(
        subcommand=ns.subcommand, file=ns.file, inputs=inputs,
        frames=getattr(ns, "frames", 1), emit=emit[getattr(ns, "emit", None)],
        budget=getattr(ns, "budget", DEFAULT_BUDGET),
        lut_threshold=getattr(ns, "lut_threshold", LUT_THRESHOLD),
        out_dir=ns.out_dir, stats=getattr(ns, "stats", False),
        trace=getattr(ns, "trace", False), oracle=getattr(ns, "oracle", False),
        force_depth=getattr(ns, "force_depth", None))


COMMANDS = {"compile": cmd_compile, "run": cmd_run, "estimate": cmd_estimate}


def main(argv: list[str] | None = None) -> int:
    cfg = parse_config(argv)
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except _Exit as e:
        return e.code


if __name__ == "__main__":
    sys.exit(main())
