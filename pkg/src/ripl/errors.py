"""Diagnostics shared by every compiler and runtime stage."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    code: str
    line: int
    col: int
    message: str

    def format(self) -> str:
        return f"ERROR {self.code} {self.line}:{self.col} {self.message}"

    def __str__(self) -> str:
        return self.format()


class RiplError(Exception):
    """Base class. Carries one or more diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic] | Diagnostic):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(d.format() for d in self.diagnostics))

    @property
    def code(self) -> str:
        return self.diagnostics[0].code

    def report(self) -> str:
        return "\n".join(d.format() for d in self.diagnostics)


class CompileError(RiplError):
    """Syntax, static, or size error; the program is rejected."""


class EvalError(RiplError):
    """Run-time fault inside a kernel or a bad input to an evaluator."""


def error(cls: type[RiplError], code: str, pos: tuple[int, int] | None, message: str) -> RiplError:
    line, col = pos if pos is not None else (0, 0)
    return cls(Diagnostic(code, line, col, message))
