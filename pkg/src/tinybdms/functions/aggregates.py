"""Aggregate functions and their local/global decomposition.

Each aggregate is an :class:`Aggregate` with four pure functions over an opaque
state: ``init``, ``step`` (fold one input value), ``combine`` (merge two
states) and ``finalize``. A complete aggregation is ``finalize(fold(step))``;
the split form runs ``step`` per partition, ships states, then ``combine`` and
``finalize`` on one node.

AQL variants (``count``, ``sum``, ``avg``, ``min``, ``max``) treat null as
unknown: any null input makes the result null (``count`` simply counts every
item). The ``sql-`` variants skip nulls. On empty input ``count`` is 0 and all
others are null.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..adm.compare import Ordering, compare_values
from ..adm.values import Bag, Int64, check_int32, check_int64, is_numeric, type_name
from ..errors import TypeMismatch


@dataclass(frozen=True)
class Aggregate:
    name: str
    init: Callable[[], object]
    step: Callable[[object, object], object]
    combine: Callable[[object, object], object]
    finalize: Callable[[object], object]

    def complete(self, values):
        s = self.init()
        for v in values:
            s = self.step(s, v)
        return self.finalize(s)


# ---- count

def _count_step(s, v):
    return s + 1


def _sql_count_step(s, v):
    return s if v is None else s + 1


def _add_counts(a, b):
    return a + b


# ---- sum / avg

def _num(v, fn: str):
    if not is_numeric(v):
        raise TypeMismatch(f"{fn} expects numeric input, got {type_name(v)}")
    return v


class _Sum:
    """State: ``(saw_null, total, n)``; total is None until a value arrives."""

    @staticmethod
    def init():
        return (False, None, 0)

    @staticmethod
    def add(a, b):
        if a is None:
            return b
        if b is None:
            return a
        if isinstance(a, float) or isinstance(b, float):
            return float(a) + float(b)
        if isinstance(a, Int64) or isinstance(b, Int64):
            return check_int64(a + b)
        return check_int32(a + b)

    @staticmethod
    def add_unchecked(a, b):
        # avg accumulates exactly; only its final double is observable
        if a is None:
            return b
        if b is None:
            return a
        return a + b

    @classmethod
    def step(cls, fn: str, skip_null: bool, add=None):
        add = add or cls.add

        def step(s, v):
            saw_null, total, n = s
            if v is None:
                return s if skip_null else (True, total, n)
            return (saw_null, add(total, _num(v, fn)), n + 1)
        return step

    @classmethod
    def combiner(cls, add=None):
        add = add or cls.add

        def combine(a, b):
            return (a[0] or b[0], add(a[1], b[1]), a[2] + b[2])
        return combine


def _sum_final(s):
    saw_null, total, n = s
    if saw_null or n == 0:
        return None
    return total


def _avg_final(s):
    saw_null, total, n = s
    if saw_null or n == 0:
        return None
    return float(total) / n


# ---- min / max

def _pick(want: Ordering, fn: str):
    def better(a, b):
        if a is None:
            return b
        if b is None:
            return a
        o = compare_values(b, a)
        if o is Ordering.INCOMPARABLE:
            if is_numeric(a) and is_numeric(b):
                return a  # NaN never wins
            raise TypeMismatch(f"{fn} over incomparable values {type_name(a)} and {type_name(b)}")
        return b if o is want else a
    return better


def _extreme(fn: str, want: Ordering, skip_null: bool) -> Aggregate:
    better = _pick(want, fn)

    def step(s, v):
        saw_null, best = s
        if v is None:
            return s if skip_null else (True, best)
        return (saw_null, better(best, v))

    def combine(a, b):
        return (a[0] or b[0], better(a[1], b[1]))

    def final(s):
        return None if s[0] else s[1]

    return Aggregate(fn, lambda: (False, None), step, combine, final)


AGGREGATES: dict[str, Aggregate] = {
    "count": Aggregate("count", lambda: 0, _count_step, _add_counts, lambda s: Int64(s)),
    "sql-count": Aggregate("sql-count", lambda: 0, _sql_count_step, _add_counts, lambda s: Int64(s)),
    "sum": Aggregate("sum", _Sum.init, _Sum.step("sum", False), _Sum.combiner(), _sum_final),
    "sql-sum": Aggregate("sql-sum", _Sum.init, _Sum.step("sql-sum", True), _Sum.combiner(), _sum_final),
    "avg": Aggregate("avg", _Sum.init, _Sum.step("avg", False, _Sum.add_unchecked),
                     _Sum.combiner(_Sum.add_unchecked), _avg_final),
    "sql-avg": Aggregate("sql-avg", _Sum.init, _Sum.step("sql-avg", True, _Sum.add_unchecked),
                         _Sum.combiner(_Sum.add_unchecked), _avg_final),
    "min": _extreme("min", Ordering.LESS, False),
    "sql-min": _extreme("sql-min", Ordering.LESS, True),
    "max": _extreme("max", Ordering.GREATER, False),
    "sql-max": _extreme("sql-max", Ordering.GREATER, True),
}


def aggregate_collection(name: str, coll):
    """Apply an aggregate to a list or bag value (the scalar call form)."""
    if coll is None:
        return None
    if not isinstance(coll, (list, Bag)):
        raise TypeMismatch(f"{name} expects a collection, got {type_name(coll)}")
    return AGGREGATES[name].complete(coll)


def is_aggregate(name: str) -> bool:
    return name in AGGREGATES

