"""Value ordering.

``compare_values`` implements the partial order used by query semantics: values
compare inside their comparison class and are *incomparable* across classes,
except that null sorts before everything.

``sort_key`` extends that to a total order usable as a Python sort key (index
keys, canonical bag printing). Within a comparable class the two agree.
"""

from __future__ import annotations

import datetime as _dt
import enum
import math

from .values import (
    Bag,
    Circle,
    Duration,
    Interval,
    Line,
    Point,
    Polygon,
    Rectangle,
    adm_equal,
    is_numeric,
)


class Ordering(enum.Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1
    INCOMPARABLE = None


def comparison_class(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "boolean"
    if is_numeric(v):
        return "numeric"
    if isinstance(v, str):
        return "string"
    if isinstance(v, _dt.datetime):
        return "datetime"
    if isinstance(v, _dt.date):
        return "date"
    if isinstance(v, _dt.time):
        return "time"
    if isinstance(v, Duration):
        if v.months == 0:
            return "day-time-duration"
        if v.millis == 0:
            return "year-month-duration"
        return "duration"
    if isinstance(v, Interval):
        return "interval-" + comparison_class(v.start)
    if isinstance(v, list):
        return "orderedlist"
    if isinstance(v, dict):
        return "record"
    if isinstance(v, Bag):
        return "bag"
    return type(v).__name__.lower()


# classes whose members are totally ordered
_ORDERED = {
    "boolean", "numeric", "string", "datetime", "date", "time",
    "day-time-duration", "year-month-duration", "orderedlist",
    "interval-date", "interval-time", "interval-datetime",
}


def _cmp(a, b) -> Ordering:
    if a < b:
        return Ordering.LESS
    if b < a:
        return Ordering.GREATER
    return Ordering.EQUAL


def compare_values(a, b) -> Ordering:
    ca, cb = comparison_class(a), comparison_class(b)
    if ca == "null" or cb == "null":
        if ca == cb:
            return Ordering.EQUAL
        return Ordering.LESS if ca == "null" else Ordering.GREATER
    if ca != cb:
        # a mixed duration equals nothing else and orders against nothing
        return Ordering.INCOMPARABLE
    if ca not in _ORDERED:
        return Ordering.EQUAL if adm_equal(a, b) else Ordering.INCOMPARABLE
    if ca == "numeric":
        if isinstance(a, float) and math.isnan(a) or isinstance(b, float) and math.isnan(b):
            return Ordering.INCOMPARABLE
        return _cmp(a, b)
    if ca.endswith("duration"):
        return _cmp((a.months, a.millis), (b.months, b.millis))
    if ca.startswith("interval"):
        return _cmp((a.start, a.end), (b.start, b.end))
    if ca == "orderedlist":
        for x, y in zip(a, b):
            o = compare_values(x, y)
            if o is not Ordering.EQUAL:
                return o
        return _cmp(len(a), len(b))
    return _cmp(a, b)


# rank of each class in the total order; MAX_RANK sits above every value
_RANK = {
    "null": 0, "boolean": 1, "numeric": 2, "nan": 3, "string": 4, "date": 5, "time": 6,
    "datetime": 7, "duration": 8, "interval": 9, "point": 10, "line": 11,
    "rectangle": 12, "circle": 13, "polygon": 14, "orderedlist": 15, "bag": 16,
    "record": 17,
}
MAX_RANK = 99
TOP = (MAX_RANK,)


def sort_key(v):
    """Total-order key: a nested tuple comparable with Python's ``<``."""
    if v is None:
        return (0,)
    if v is True or v is False:
        return (1, v)
    if isinstance(v, (int, float)):
        if isinstance(v, float) and math.isnan(v):
            return (3,)
        return (2, v)
    if isinstance(v, str):
        return (4, v)
    if isinstance(v, _dt.datetime):
        return (7, v)
    if isinstance(v, _dt.date):
        return (5, v)
    if isinstance(v, _dt.time):
        return (6, v)
    if isinstance(v, Duration):
        return (8, v.months, v.millis)
    if isinstance(v, Interval):
        return (9, sort_key(v.start), sort_key(v.end))
    if isinstance(v, Point):
        return (10, v.x, v.y)
    if isinstance(v, Line):
        return (11, v.p1.x, v.p1.y, v.p2.x, v.p2.y)
    if isinstance(v, Rectangle):
        return (12, v.low.x, v.low.y, v.high.x, v.high.y)
    if isinstance(v, Circle):
        return (13, v.center.x, v.center.y, v.radius)
    if isinstance(v, Polygon):
        return (14, tuple((p.x, p.y) for p in v.points))
    if isinstance(v, list):
        return (15, tuple(sort_key(x) for x in v))
    if isinstance(v, Bag):
        return (16, tuple(sorted(sort_key(x) for x in v)))
    if isinstance(v, dict):
        return (17, tuple(sorted((k, sort_key(x)) for k, x in v.items())))
    raise TypeError(f"not an ADM value: {v!r}")


def key_of(values) -> tuple:
    """Sort key of a composite (tuple) index key."""
    return tuple(sort_key(v) for v in values)
