"""Diagnostics shared by the patch parser, validator and equation compiler."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int = 1
    length: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    """A single error or warning, optionally anchored to source text."""

    severity: str
    code: str
    message: str
    span: Optional[SourceSpan] = None

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def format(self, filename: str = "<patch>") -> str:
        where = f"{filename}:{self.span}" if self.span else filename
        return f"{where}: {self.severity} {self.code}: {self.message}"


def error(code: str, message: str, span: Optional[SourceSpan] = None) -> Diagnostic:
    return Diagnostic("error", code, message, span)


def warning(code: str, message: str, span: Optional[SourceSpan] = None) -> Diagnostic:
    return Diagnostic("warning", code, message, span)


class DiagnosticError(Exception):
    """Raised when an operation produced one or more error diagnostics."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        super().__init__(first.format() if first else "unknown error")

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]
