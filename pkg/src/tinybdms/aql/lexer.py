"""AQL tokenizer.

Identifiers may contain inner hyphens (``author-id``, ``word-tokens``), so
``a-b`` is one identifier; write ``a - b`` for subtraction. Comments are
``// ...`` and ``/* ... */``; a comment opening with ``/*+`` is an optimizer
hint and is attached to the token that follows it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import AqlSyntaxError

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<linecomment>//[^\n]*)
  | (?P<hint>/\*\+.*?\*/)
  | (?P<comment>/\*.*?\*/)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<double>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<var>\$[A-Za-z_][A-Za-z0-9_]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<op>:=|~=|!=|<=|>=|[=<>+\-*/%()\[\]{},;:.?@])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident var int double string op eof
    text: str
    start: int
    end: int
    line: int
    col: int
    hints: tuple = ()


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pending_hints: list[str] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if not m:
            line, col = _line_col(text, pos)
            if text.startswith("/*", pos):
                raise AqlSyntaxError("unterminated comment", line, col)
            if text[pos] in "\"'":
                raise AqlSyntaxError("unterminated string literal", line, col)
            raise AqlSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "hint":
            pending_hints.extend(h for h in re.split(r"[\s,]+", m.group()[3:-2].strip()) if h)
        elif kind not in ("ws", "linecomment", "comment"):
            line, col = _line_col(text, pos)
            out.append(Token(kind, m.group(), pos, m.end(), line, col, tuple(pending_hints)))
            pending_hints = []
        pos = m.end()
    line, col = _line_col(text, n)
    out.append(Token("eof", "", n, n, line, col, tuple(pending_hints)))
    return out
