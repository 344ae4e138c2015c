"""Diagnostic records shared by the parser and the story validator."""

from __future__ import annotations

from dataclasses import dataclass

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    """One problem found in a source text or story.

    Parser diagnostics carry 1-based line/column positions into the source;
    validator diagnostics have no source text and leave them None.
    """

    severity: str
    code: str
    message: str
    line: int | None = None
    column: int | None = None

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "line": self.line,
            "column": self.column,
        }

    def __str__(self) -> str:
        pos = f"{self.line}:{self.column}: " if self.line is not None else ""
        return f"{pos}{self.code} {self.message}"


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diagnostics)


class InvalidStory(Exception):
    """A story failed validation where an error-free one was required."""

    code = "invalid_story"

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__(
            "story fails validation: "
            + "; ".join(str(d) for d in diagnostics[:3])
            + ("; ..." if len(diagnostics) > 3 else "")
        )
        self.diagnostics = diagnostics
