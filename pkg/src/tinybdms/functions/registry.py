"""The builtin function registry.

A :class:`Builtin` wraps a Python implementation with its arity and null rule.
Unless ``null_aware`` is set, a null argument makes the call return null
without invoking the implementation.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass
from typing import Callable

from ..adm import text as admtext
from ..adm.values import Bag, is_numeric, type_name
from ..errors import QueryError, SemanticError, TypeMismatch
from . import spatial, strings, temporal
from .aggregates import AGGREGATES, aggregate_collection
from .ops import not_


@dataclass(frozen=True)
class Builtin:
    name: str
    impl: Callable
    min_args: int
    max_args: int
    null_aware: bool = False
    needs_now: bool = False  # impl receives the job's frozen clock as first argument
    category: str = "misc"
    summary: str = ""

    def check_arity(self, n: int, line: int = 0, column: int = 0) -> None:
        if not self.min_args <= n <= self.max_args:
            want = str(self.min_args) if self.min_args == self.max_args else f"{self.min_args}..{self.max_args}"
            raise SemanticError(f"function {self.name} expects {want} argument(s), got {n}", line, column)

    def call(self, args, now: _dt.datetime | None = None):
        if not self.null_aware and any(a is None for a in args):
            return None
        if self.needs_now:
            return self.impl(now, *args)
        return self.impl(*args)


BUILTINS: dict[str, Builtin] = {}


def register(name, impl, min_args, max_args=None, *, null_aware=False, needs_now=False, category="misc",
             summary=""):
    BUILTINS[name] = Builtin(name, impl, min_args, min_args if max_args is None else max_args, null_aware,
                             needs_now, category, summary)


def lookup(name: str) -> Builtin | None:
    return BUILTINS.get(name)


def _constructor(name: str):
    parse = admtext.STRING_CONSTRUCTORS[name]

    def construct(v):
        if isinstance(v, str):
            if name == "string":
                return v
            try:
                return parse(v)
            except (ValueError, OverflowError) as e:
                raise QueryError(f"cannot construct {name} from {v!r}: {e}") from None
        if name in ("int8", "int16", "int32", "int64") and is_numeric(v):
            n = int(v)
            return admtext.make_int64(n) if name == "int64" else admtext.make_int32(n)
        if name in ("double", "float") and is_numeric(v):
            return float(v)
        if name == "string":
            return admtext.print_adm(v).strip('"') if not isinstance(v, str) else v
        want = {"int8": "int32", "int16": "int32", "float": "double"}.get(name, name)
        if type_name(v) == want:
            return v
        raise TypeMismatch(f"cannot construct {name} from {type_name(v)}")
    return construct


for _c in admtext.STRING_CONSTRUCTORS:
    register(_c, _constructor(_c), 1, category="constructor", summary=f"{_c} from a string literal")

register("interval", temporal.interval_from, 2, category="constructor", summary="interval(start, end)")


def _is_null(v) -> bool:
    return v is None


def _is_missing(v) -> bool:
    return v is None


def _len(coll) -> int:
    if isinstance(coll, (list, Bag)):
        return len(coll)
    raise TypeMismatch(f"len expects a collection, got {type_name(coll)}")


def _get_item(coll, i):
    if not isinstance(coll, list):
        raise TypeMismatch("get-item expects an ordered list")
    return coll[i] if 0 <= i < len(coll) else None


def _field_names(rec):
    if not isinstance(rec, dict):
        raise TypeMismatch("field-names expects a record")
    return list(rec)


register("is-null", _is_null, 1, null_aware=True, summary="true if the argument is null or missing")
register("is-missing", _is_missing, 1, null_aware=True)
register("not", not_, 1, null_aware=True, summary="boolean negation (null stays null)")
register("len", _len, 1)
register("get-item", _get_item, 2)
register("field-names", _field_names, 1)

# strings and similarity
register("contains", strings.contains, 2, category="string")
register("like", strings.like, 2, category="string", summary="SQL LIKE with % and _")
register("matches", strings.matches, 2, 3, category="string", summary="regex search")
register("replace", strings.replace, 3, 4, category="string", summary="regex replace-all")
register("string-length", strings.string_length, 1, category="string")
register("lowercase", strings.lowercase, 1, category="string")
register("uppercase", strings.uppercase, 1, category="string")
register("starts-with", strings.starts_with, 2, category="string")
register("ends-with", strings.ends_with, 2, category="string")
register("string-concat", strings.string_concat, 1, category="string")
register("string-join", strings.string_join, 2, category="string")
register("substring", strings.substring, 2, 3, category="string", summary="zero-based substring")
register("word-tokens", strings.word_tokens, 1, category="string", summary="lowercased alphanumeric tokens")
register("edit-distance", strings.edit_distance, 2, category="similarity")
register("edit-distance-check", strings.edit_distance_check, 3, category="similarity")
register("similarity-jaccard", strings.similarity_jaccard, 2, category="similarity")
register("similarity-jaccard-check", strings.similarity_jaccard_check, 3, category="similarity")

# temporal
register("current-datetime", temporal.current_datetime, 0, needs_now=True, category="temporal")
register("current-date", temporal.current_date, 0, needs_now=True, category="temporal")
register("current-time", temporal.current_time, 0, needs_now=True, category="temporal")
register("subtract-datetime", temporal.datetime_subtract, 2, category="temporal")
register("subtract-date", temporal.date_subtract, 2, category="temporal")
register("subtract-time", temporal.time_subtract, 2, category="temporal")
register("subtract-duration", temporal.subtract_duration, 2, category="temporal")
register("add-duration", temporal.add_duration, 2, category="temporal")
register("interval-bin", temporal.interval_bin, 3, category="temporal")
for _kind in ("date", "time", "datetime"):
    register(f"interval-start-from-{_kind}", temporal.interval_start_from, 2, category="temporal")
register("get-interval-start", temporal.get_interval_start, 1, category="temporal")
register("get-interval-end", temporal.get_interval_end, 1, category="temporal")
register("interval-overlaps", temporal.interval_overlaps, 2, category="temporal")
register("interval-covers", temporal.interval_covers, 2, category="temporal")
for _part in ("year", "month", "day", "hour", "minute", "second", "millisecond"):
    register(f"get-{_part}", getattr(temporal, f"get_{_part}"), 1, category="temporal")
register("get-date-from-datetime", temporal.get_date_from_datetime, 1, category="temporal")
register("get-time-from-datetime", temporal.get_time_from_datetime, 1, category="temporal")
register("datetime-from-date-time", temporal.datetime_from_date_time, 2, category="temporal")

# spatial
register("spatial-distance", spatial.spatial_distance, 2, category="spatial")
register("spatial-intersect", spatial.spatial_intersect, 2, category="spatial")
register("spatial-area", spatial.spatial_area, 1, category="spatial")
register("create-point", spatial.create_point, 2, category="spatial")
register("create-rectangle", spatial.create_rectangle, 2, category="spatial")
register("create-circle", spatial.create_circle, 2, category="spatial")
register("create-line", spatial.create_line, 2, category="spatial")
register("get-x", spatial.get_x, 1, category="spatial")
register("get-y", spatial.get_y, 1, category="spatial")

# aggregates over a collection argument
for _agg in AGGREGATES:
    register(_agg, (lambda n: lambda coll: aggregate_collection(n, coll))(_agg), 1, null_aware=True,
             category="aggregate")


def list_functions() -> list[tuple[str, str, str]]:
    """``(name, arity, category)`` for every builtin, sorted by name."""
    out = []
    for b in sorted(BUILTINS.values(), key=lambda b: b.name):
        arity = str(b.min_args) if b.min_args == b.max_args else f"{b.min_args}..{b.max_args}"
        out.append((b.name, arity, b.category))
    return out
