"""ADM text syntax: parse and canonical print.

The grammar is JSON plus:

* bags written ``{{ v, ... }}``,
* typed constructors applied to string literals, e.g. ``datetime("2010-08-15T08:10:00")``,
  ``point("3.0,4.5")``, ``int64("9")``, ``duration("P30D")``,
* ``interval(<temporal>, <temporal>)``,
* single-quoted strings as an alternative to double-quoted ones.

Integer literals are int32 unless they do not fit, in which case they are int64.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import re

from ..errors import AdmSyntaxError
from . import temporal
from .compare import sort_key
from .values import (
    INT32_MAX,
    INT32_MIN,
    Bag,
    Circle,
    Duration,
    Int64,
    Interval,
    Line,
    Point,
    Polygon,
    Rectangle,
    check_int64,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<number>-?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*)
  | (?P<punct>[{}\[\],:()])
    """,
    re.VERBOSE,
)

_ESCAPES = {'"': '"', "'": "'", "\\": "\\", "/": "/", "b": "\b", "f": "\f", "n": "\n", "r": "\r", "t": "\t"}


def unescape(body: str) -> str:
    """Decode JSON escapes (plus ``\\'``) in the inside of a string literal."""
    if "\\" not in body:
        return body
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        e = body[i + 1] if i + 1 < len(body) else ""
        if e == "u":
            hexpart = body[i + 2:i + 6]
            if len(hexpart) != 4 or not all(h in "0123456789abcdefABCDEF" for h in hexpart):
                raise ValueError(f"bad unicode escape \\u{hexpart}")
            code = int(hexpart, 16)
            i += 6
            # surrogate pairs
            if 0xD800 <= code < 0xDC00 and body[i:i + 2] == "\\u":
                low = int(body[i + 2:i + 6], 16)
                if 0xDC00 <= low < 0xE000:
                    code = 0x10000 + ((code - 0xD800) << 10) + (low - 0xDC00)
                    i += 6
            out.append(chr(code))
        elif e in _ESCAPES:
            out.append(_ESCAPES[e])
            i += 2
        else:
            raise ValueError(f"bad escape \\{e}")
    return "".join(out)


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _float_text(s: str) -> float:
    return float(s)


def _coords(text: str, n: int | None = None) -> list[Point]:
    pts = []
    for part in text.split():
        xy = part.split(",")
        if len(xy) != 2:
            raise ValueError(f"malformed point {part!r}")
        pts.append(Point(float(xy[0]), float(xy[1])))
    if n is not None and len(pts) != n:
        raise ValueError(f"expected {n} points, got {len(pts)}")
    return pts


def make_point(text: str) -> Point:
    return _coords(text, 1)[0]


def make_line(text: str) -> Line:
    return Line(*_coords(text, 2))


def make_rectangle(text: str) -> Rectangle:
    return Rectangle(*_coords(text, 2))


def make_circle(text: str) -> Circle:
    parts = text.split()
    if len(parts) != 2:
        raise ValueError(f"malformed circle {text!r}")
    return Circle(make_point(parts[0]), float(parts[1]))


def make_polygon(text: str) -> Polygon:
    return Polygon(_coords(text))


def make_double(text: str) -> float:
    t = text.strip()
    special = {"NaN": math.nan, "INF": math.inf, "-INF": -math.inf}
    if t in special:
        return special[t]
    return float(t)


def make_int32(text) -> int:
    n = int(text)
    if not INT32_MIN <= n <= INT32_MAX:
        raise ValueError(f"int32 out of range: {n}")
    return n


def make_int64(text) -> Int64:
    return check_int64(int(text))


def make_boolean(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError(f"malformed boolean {text!r}")
    return text == "true"


# constructor name -> function of one string argument
STRING_CONSTRUCTORS = {
    "datetime": temporal.parse_datetime,
    "date": temporal.parse_date,
    "time": temporal.parse_time,
    "duration": temporal.parse_duration,
    "point": make_point,
    "line": make_line,
    "rectangle": make_rectangle,
    "circle": make_circle,
    "polygon": make_polygon,
    "int8": make_int32,
    "int16": make_int32,
    "int32": make_int32,
    "int64": make_int64,
    "double": make_double,
    "float": make_double,
    "boolean": make_boolean,
    "string": str,
}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        n = len(text)
        while pos < n:
            m = _TOKEN_RE.match(text, pos)
            if not m:
                raise self._error(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            if kind != "ws":
                self.tokens.append((kind, m.group(), pos, m.end()))
            pos = m.end()
        self.i = 0

    def _error(self, msg: str, pos: int | None = None) -> AdmSyntaxError:
        if pos is None:
            pos = self.tokens[self.i][2] if self.i < len(self.tokens) else len(self.text)
        line, col = _line_col(self.text, pos)
        return AdmSyntaxError(msg, line, col)

    def peek(self, k: int = 0):
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else None

    def at_punct(self, p: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t[0] == "punct" and t[1] == p

    def expect(self, p: str):
        t = self.peek()
        if t is None or t[0] != "punct" or t[1] != p:
            raise self._error(f"expected {p!r}" + (f", found {t[1]!r}" if t else ", found end of input"))
        self.i += 1
        return t

    def _adjacent(self) -> bool:
        a, b = self.peek(), self.peek(1)
        return a is not None and b is not None and a[3] == b[2]

    def at_end(self) -> bool:
        return self.i >= len(self.tokens)

    def value(self):
        t = self.peek()
        if t is None:
            raise self._error("unexpected end of input")
        kind, text, start, _ = t
        if kind == "number":
            self.i += 1
            if any(c in text for c in ".eE"):
                return float(text)
            n = int(text)
            return n if INT32_MIN <= n <= INT32_MAX else check_int64(n)
        if kind == "string":
            self.i += 1
            try:
                return unescape(text[1:-1])
            except ValueError as e:
                raise self._error(str(e), start) from None
        if kind == "ident":
            self.i += 1
            if text == "null":
                return None
            if text == "true":
                return True
            if text == "false":
                return False
            return self.constructor(text, start)
        if text == "{":
            if self.at_punct("{", 1) and self._adjacent():
                return self.bag()
            return self.record()
        if text == "[":
            return self.ordered_list()
        raise self._error(f"unexpected {text!r}")

    def constructor(self, name: str, start: int):
        self.expect("(")
        args = []
        if not self.at_punct(")"):
            args.append(self.value())
            while self.at_punct(","):
                self.i += 1
                args.append(self.value())
        self.expect(")")
        if name == "interval":
            if len(args) != 2:
                raise self._error("interval expects two temporal arguments", start)
            try:
                return Interval(args[0], args[1])
            except ValueError as e:
                raise self._error(str(e), start) from None
        fn = STRING_CONSTRUCTORS.get(name)
        if fn is None:
            raise self._error(f"unknown constructor {name!r}", start)
        if len(args) != 1 or not isinstance(args[0], str):
            raise self._error(f"{name} expects one string argument", start)
        try:
            return fn(args[0])
        except (ValueError, OverflowError) as e:
            raise self._error(f"malformed {name} literal: {e}", start) from None

    def record(self):
        self.expect("{")
        rec = {}
        if not self.at_punct("}"):
            while True:
                t = self.peek()
                if t is None or t[0] != "string":
                    raise self._error("expected a quoted field name")
                self.i += 1
                name = unescape(t[1][1:-1])
                if name in rec:
                    raise self._error(f"duplicate field {name!r}", t[2])
                self.expect(":")
                rec[name] = self.value()
                if not self.at_punct(","):
                    break
                self.i += 1
        self.expect("}")
        return rec

    def ordered_list(self):
        self.expect("[")
        items = []
        if not self.at_punct("]"):
            items.append(self.value())
            while self.at_punct(","):
                self.i += 1
                items.append(self.value())
        self.expect("]")
        return items

    def bag(self):
        self.expect("{")
        self.expect("{")
        items = []
        if not self.at_punct("}"):
            items.append(self.value())
            while self.at_punct(","):
                self.i += 1
                items.append(self.value())
        if not (self.at_punct("}") and self.at_punct("}", 1) and self._adjacent()):
            raise self._error("expected '}}' closing a bag")
        self.i += 2
        return Bag(items)


def parse_adm_text(text: str):
    """Parse exactly one ADM value."""
    p = _Parser(text)
    v = p.value()
    if not p.at_end():
        raise p._error("trailing text after value")
    return v


def parse_adm_stream(text: str):
    """Yield every top-level ADM value in ``text`` (whitespace separated)."""
    p = _Parser(text)
    while not p.at_end():
        yield p.value()


def _print_float(f: float) -> str:
    if math.isnan(f):
        return 'double("NaN")'
    if math.isinf(f):
        return 'double("INF")' if f > 0 else 'double("-INF")'
    return repr(f)


def _pt(p: Point) -> str:
    return f"{p.x!r},{p.y!r}"


def print_adm(v) -> str:
    """Canonical text; bags print in ``sort_key`` order."""
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, Int64):
        return f'int64("{int(v)}")'
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return _print_float(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, dict):
        if not v:
            return "{ }"
        return "{ " + ", ".join(f"{json.dumps(k, ensure_ascii=False)}: {print_adm(x)}" for k, x in v.items()) + " }"
    if isinstance(v, list):
        return "[ " + ", ".join(print_adm(x) for x in v) + " ]" if v else "[ ]"
    if isinstance(v, Bag):
        if not v.items:
            return "{{ }}"
        return "{{ " + ", ".join(print_adm(x) for x in sorted(v.items, key=sort_key)) + " }}"
    if isinstance(v, _dt.datetime):
        return f'datetime("{temporal.format_datetime(v)}")'
    if isinstance(v, _dt.date):
        return f'date("{temporal.format_date(v)}")'
    if isinstance(v, _dt.time):
        return f'time("{temporal.format_time(v)}")'
    if isinstance(v, Duration):
        return f'duration("{temporal.format_duration(v)}")'
    if isinstance(v, Interval):
        return f"interval({print_adm(v.start)}, {print_adm(v.end)})"
    if isinstance(v, Point):
        return f'point("{_pt(v)}")'
    if isinstance(v, Line):
        return f'line("{_pt(v.p1)} {_pt(v.p2)}")'
    if isinstance(v, Rectangle):
        return f'rectangle("{_pt(v.low)} {_pt(v.high)}")'
    if isinstance(v, Circle):
        return f'circle("{_pt(v.center)} {v.radius!r}")'
    if isinstance(v, Polygon):
        return 'polygon("' + " ".join(_pt(p) for p in v.points) + '")'
    raise TypeError(f"not an ADM value: {v!r}")
