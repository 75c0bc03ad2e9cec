"""Tokenizer shared by the specification and LTL parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .diagnostics import ArchError, Diagnostic

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(?://|\#)[^\n]*)
  | (?P<int>-?[0-9]+)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>->|[{}(),;:.=&|!])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, str, punct, eof
    text: str
    line: int
    col: int

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


class SyntaxErrorDiag(ArchError):
    code = "SYNTAX"

    def __init__(self, diag: Diagnostic):
        super().__init__(diag.message, diag.code, [diag])


def unescape(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise SyntaxErrorDiag(
                Diagnostic("BAD_CHAR", f"unexpected character {text[pos]!r}", line, col)
            )
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    col = pos - line_start + 1
    tokens.append(Token("eof", "", line, col))
    return tokens


class TokenStream:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "ident") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, expected, code: str = "SYNTAX") -> SyntaxErrorDiag:
        t = self.tok
        exp = sorted(set(expected))
        msg = f"unexpected {t.describe()}; expected one of: {', '.join(exp)}"
        return SyntaxErrorDiag(Diagnostic(code, msg, t.line, t.col))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error([repr(text)])
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            raise self.error([what])
        return self.advance()
