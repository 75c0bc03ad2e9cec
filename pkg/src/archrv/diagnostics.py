from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Diagnostic:
    """One finding; ``code`` is a stable machine-readable identifier."""

    code: str
    message: str
    line: Optional[int] = None
    col: Optional[int] = None
    step: Optional[int] = None
    ref: Optional[str] = None

    def format(self, filename: str = "<input>") -> str:
        line = self.line if self.line is not None else 0
        col = self.col if self.col is not None else 0
        return f"{filename}:{line}:{col}: {self.code}: {self.message}"

    def to_json(self) -> dict:
        out: dict = {"code": self.code, "message": self.message}
        for key in ("line", "col", "step", "ref"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


class ArchError(Exception):
    """Base class for errors that carry a diagnostic code."""

    code = "ERROR"

    def __init__(self, message: str, code: Optional[str] = None, diagnostics=()):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.diagnostics = list(diagnostics)
