"""Python representation of ADM values.

ADM values map onto plain Python objects wherever the semantics line up:

=============  ==========================================
ADM            Python
=============  ==========================================
null           ``None``
boolean        ``bool``
int32          ``int``
int64          :class:`Int64` (an ``int`` subclass)
double         ``float``
string         ``str``
date           ``datetime.date``
time           ``datetime.time``
datetime       ``datetime.datetime`` (naive, millisecond precision)
duration       :class:`Duration`
interval       :class:`Interval`
point ...      :class:`Point`, :class:`Line`, :class:`Rectangle`,
               :class:`Circle`, :class:`Polygon`
record         ``dict`` (insertion ordered, never mutated once built)
orderedList    ``list``
bag            :class:`Bag`
=============  ==========================================
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass

INT32_MIN, INT32_MAX = -(2**31), 2**31 - 1
INT64_MIN, INT64_MAX = -(2**63), 2**63 - 1


class Int64(int):
    """An int64 value. Plain ``int`` means int32."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"Int64({int(self)})"


class Bag:
    """Unordered multiset. Equality ignores element order."""

    __slots__ = ("items",)

    def __init__(self, items=()):
        self.items = tuple(items)

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __repr__(self) -> str:
        return f"Bag({list(self.items)!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bag):
            return NotImplemented
        if len(self.items) != len(other.items):
            return False
        from .compare import sort_key

        mine = sorted(self.items, key=sort_key)
        theirs = sorted(other.items, key=sort_key)
        return all(adm_equal(a, b) for a, b in zip(mine, theirs))

    def __hash__(self) -> int:
        from .compare import sort_key

        return hash(tuple(sorted(sort_key(v) for v in self.items)))


@dataclass(frozen=True)
class Duration:
    """ISO-8601 duration split into a calendar part and an exact part."""

    months: int = 0
    millis: int = 0

    def __post_init__(self):
        if (self.months < 0 < self.millis) or (self.millis < 0 < self.months):
            raise ValueError("duration components must share a sign")

    def __neg__(self) -> "Duration":
        return Duration(-self.months, -self.millis)

    @property
    def is_year_month(self) -> bool:
        return self.millis == 0

    @property
    def is_day_time(self) -> bool:
        return self.months == 0


@dataclass(frozen=True)
class Interval:
    start: object
    end: object

    def __post_init__(self):
        if type(self.start) is not type(self.end):
            raise ValueError("interval endpoints must have the same type")
        if self.end < self.start:
            raise ValueError("interval end precedes its start")


def _finite(*coords: float) -> None:
    for c in coords:
        if not math.isfinite(c):
            raise ValueError("spatial coordinates must be finite")


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        _finite(self.x, self.y)


@dataclass(frozen=True)
class Line:
    p1: Point
    p2: Point


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle, normalised so ``low`` is the lower-left corner."""

    low: Point
    high: Point

    def __post_init__(self):
        lo = Point(min(self.low.x, self.high.x), min(self.low.y, self.high.y))
        hi = Point(max(self.low.x, self.high.x), max(self.low.y, self.high.y))
        object.__setattr__(self, "low", lo)
        object.__setattr__(self, "high", hi)


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        _finite(self.radius)
        if self.radius < 0:
            raise ValueError("circle radius must be non-negative")


@dataclass(frozen=True)
class Polygon:
    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 3:
            raise ValueError("polygon needs at least three points")


SPATIAL_TYPES = (Point, Line, Rectangle, Circle, Polygon)


def type_name(v) -> str:
    """ADM type name of a Python value."""
    if v is None:
        return "null"
    if v is True or v is False:
        return "boolean"
    if isinstance(v, Int64):
        return "int64"
    if isinstance(v, int):
        return "int32"
    if isinstance(v, float):
        return "double"
    if isinstance(v, str):
        return "string"
    if isinstance(v, _dt.datetime):
        return "datetime"
    if isinstance(v, _dt.date):
        return "date"
    if isinstance(v, _dt.time):
        return "time"
    if isinstance(v, Duration):
        return "duration"
    if isinstance(v, Interval):
        return "interval"
    if isinstance(v, dict):
        return "record"
    if isinstance(v, list):
        return "orderedlist"
    if isinstance(v, Bag):
        return "unorderedlist"
    if isinstance(v, Point):
        return "point"
    if isinstance(v, Line):
        return "line"
    if isinstance(v, Rectangle):
        return "rectangle"
    if isinstance(v, Circle):
        return "circle"
    if isinstance(v, Polygon):
        return "polygon"
    raise TypeError(f"not an ADM value: {v!r}")


def is_numeric(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def check_int32(n: int) -> int:
    if not INT32_MIN <= n <= INT32_MAX:
        from ..errors import ArithmeticOverflow

        raise ArithmeticOverflow(f"int32 overflow: {n}")
    return n


def check_int64(n: int) -> Int64:
    if not INT64_MIN <= n <= INT64_MAX:
        from ..errors import ArithmeticOverflow

        raise ArithmeticOverflow(f"int64 overflow: {n}")
    return Int64(n)


def adm_equal(a, b) -> bool:
    """Deep ADM equality: numerics compare by value, booleans never equal numbers,
    bags compare as multisets, records ignore field order."""
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if is_numeric(a) or is_numeric(b):
        return is_numeric(a) and is_numeric(b) and a == b
    if isinstance(a, dict):
        if not isinstance(b, dict) or a.keys() != b.keys():
            return False
        return all(adm_equal(a[k], b[k]) for k in a)
    if isinstance(a, list):
        if not isinstance(b, list) or len(a) != len(b):
            return False
        return all(adm_equal(x, y) for x, y in zip(a, b))
    if type(a) is not type(b):
        return False
    return a == b
