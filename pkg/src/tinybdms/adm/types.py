"""The Datatype schema language and conformance checking.

A datatype body is a :class:`TypeExpr`:

* :class:`TypeRef` names a builtin primitive or another datatype in the same
  dataverse,
* :class:`RecordType` lists fields (each possibly optional, written ``t?``) and
  is ``open`` unless declared ``closed``,
* :class:`ListType` / :class:`BagType` wrap an item type (``[t]`` and ``{{ t }}``).

Type references are resolved through a *resolver*: any object with a
``get(name)`` method returning a :class:`Datatype` or ``None`` (a plain dict
works).
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass, field

from ..errors import CatalogError, UnknownType
from .values import (
    INT32_MAX,
    INT32_MIN,
    INT64_MAX,
    INT64_MIN,
    Bag,
    Circle,
    Duration,
    Int64,
    Interval,
    Line,
    Point,
    Polygon,
    Rectangle,
)

_INT_RANGES = {
    "int8": (-(2**7), 2**7 - 1),
    "int16": (-(2**15), 2**15 - 1),
    "int32": (INT32_MIN, INT32_MAX),
    "int64": (INT64_MIN, INT64_MAX),
}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


_PRIMITIVE_CHECKS = {
    "any": lambda v: True,
    "boolean": lambda v: isinstance(v, bool),
    "float": _is_num,
    "double": _is_num,
    "string": lambda v: isinstance(v, str),
    "date": lambda v: isinstance(v, _dt.date) and not isinstance(v, _dt.datetime),
    "time": lambda v: isinstance(v, _dt.time),
    "datetime": lambda v: isinstance(v, _dt.datetime),
    "duration": lambda v: isinstance(v, Duration),
    "year-month-duration": lambda v: isinstance(v, Duration) and v.is_year_month,
    "day-time-duration": lambda v: isinstance(v, Duration) and v.is_day_time,
    "interval": lambda v: isinstance(v, Interval),
    "point": lambda v: isinstance(v, Point),
    "line": lambda v: isinstance(v, Line),
    "rectangle": lambda v: isinstance(v, Rectangle),
    "circle": lambda v: isinstance(v, Circle),
    "polygon": lambda v: isinstance(v, Polygon),
}
for _name, (_lo, _hi) in _INT_RANGES.items():
    _PRIMITIVE_CHECKS[_name] = (lambda lo, hi: lambda v: _is_int(v) and lo <= v <= hi)(_lo, _hi)

PRIMITIVES = frozenset(_PRIMITIVE_CHECKS)


class TypeExpr:
    """Base class of type bodies."""


@dataclass(frozen=True)
class TypeRef(TypeExpr):
    name: str

    @property
    def is_primitive(self) -> bool:
        return self.name in PRIMITIVES


@dataclass(frozen=True)
class FieldDef:
    name: str
    type: TypeExpr
    optional: bool = False


@dataclass(frozen=True)
class RecordType(TypeExpr):
    fields: tuple = ()
    open: bool = True

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        seen = set()
        for f in self.fields:
            if f.name in seen:
                raise CatalogError(f"duplicate field {f.name!r} in record type")
            seen.add(f.name)

    def field(self, name: str) -> FieldDef | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class ListType(TypeExpr):
    item: TypeExpr


@dataclass(frozen=True)
class BagType(TypeExpr):
    item: TypeExpr


@dataclass(frozen=True)
class Datatype:
    name: str
    body: TypeExpr
    dataverse: str = ""

    @property
    def kind(self) -> str:
        if isinstance(self.body, RecordType):
            return "record"
        if isinstance(self.body, ListType):
            return "orderedList"
        if isinstance(self.body, BagType):
            return "bag"
        return "primitive-alias"


MISSING_REQUIRED = "missing-required"
EXTRA_FIELD_CLOSED = "extra-field-closed"
TYPE_MISMATCH = "type-mismatch"


@dataclass
class ConformanceReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        return "; ".join(f"{path or '$'}: {reason}" for path, reason in self.violations)


def _lookup(name: str, resolver) -> TypeExpr:
    if name in PRIMITIVES:
        return TypeRef(name)
    dt = resolver.get(name) if resolver is not None else None
    if dt is None:
        raise UnknownType(f"unknown type {name!r}")
    return dt.body if isinstance(dt, Datatype) else dt


def _resolve(t: TypeExpr, resolver, depth: int = 0) -> TypeExpr:
    while isinstance(t, TypeRef) and not t.is_primitive:
        if depth > 64:
            raise CatalogError(f"type alias chain too deep at {t.name!r}")
        t = _lookup(t.name, resolver)
        depth += 1
    return t


def _check(v, t: TypeExpr, resolver, path: str, out: list) -> None:
    t = _resolve(t, resolver)
    if isinstance(t, TypeRef):
        if not _PRIMITIVE_CHECKS[t.name](v):
            out.append((path, TYPE_MISMATCH))
        return
    if isinstance(t, RecordType):
        if not isinstance(v, dict):
            out.append((path, TYPE_MISMATCH))
            return
        for f in t.fields:
            sub = f"{path}.{f.name}" if path else f.name
            if f.name not in v:
                if not f.optional:
                    out.append((sub, MISSING_REQUIRED))
                continue
            x = v[f.name]
            if x is None:
                if not f.optional:
                    out.append((sub, TYPE_MISMATCH))
                continue
            _check(x, f.type, resolver, sub, out)
        if not t.open:
            declared = {f.name for f in t.fields}
            for k in v:
                if k not in declared:
                    out.append((f"{path}.{k}" if path else k, EXTRA_FIELD_CLOSED))
        return
    want = list if isinstance(t, ListType) else Bag
    if not isinstance(v, want):
        out.append((path, TYPE_MISMATCH))
        return
    for i, x in enumerate(v):
        _check(x, t.item, resolver, f"{path}[{i}]", out)


def conforms(value, type_name: str, resolver) -> ConformanceReport:
    """Check ``value`` against the named type.

    Raises :class:`UnknownType` if ``type_name`` does not resolve.
    """
    t = _lookup(type_name, resolver)
    report = ConformanceReport()
    _check(value, t, resolver, "", report.violations)
    return report


def conforms_expr(value, t: TypeExpr, resolver) -> ConformanceReport:
    report = ConformanceReport()
    _check(value, t, resolver, "", report.violations)
    return report


def coerce(value, t: TypeExpr, resolver):
    """Apply declared numeric widths to a conforming value (int -> double,
    int -> int64). Undeclared (open) content is left untouched."""
    if value is None:
        return None
    t = _resolve(t, resolver)
    if isinstance(t, TypeRef):
        if t.name in ("double", "float") and not isinstance(value, float):
            return float(value)
        if t.name == "int64" and not isinstance(value, Int64):
            return Int64(value)
        if t.name in ("int8", "int16", "int32") and isinstance(value, Int64):
            return int(value)
        return value
    if isinstance(t, RecordType):
        out = {}
        for k, x in value.items():
            f = t.field(k)
            out[k] = coerce(x, f.type, resolver) if f is not None else x
        return out
    if isinstance(t, ListType):
        return [coerce(x, t.item, resolver) for x in value]
    return Bag(coerce(x, t.item, resolver) for x in value)


def references(t: TypeExpr):
    """Yield the non-primitive type names referenced by ``t``."""
    if isinstance(t, TypeRef):
        if not t.is_primitive:
            yield t.name
    elif isinstance(t, RecordType):
        for f in t.fields:
            yield from references(f.type)
    elif isinstance(t, (ListType, BagType)):
        yield from references(t.item)


def check_definition(name: str, body: TypeExpr, resolver) -> None:
    """Validate a new type: every reference resolves and nothing refers back to
    ``name`` (recursive types are not supported)."""
    stack = [(ref, (name,)) for ref in references(body)]
    while stack:
        ref, trail = stack.pop()
        if ref == name:
            raise CatalogError(f"recursive type definition: {' -> '.join(trail + (ref,))}")
        dt = resolver.get(ref) if resolver is not None else None
        if dt is None:
            raise UnknownType(f"unknown type {ref!r} referenced by {name!r}")
        if ref in trail:
            continue
        stack.extend((r, trail + (ref,)) for r in references(dt.body))


def field_type(t: TypeExpr, path, resolver) -> tuple[TypeExpr | None, bool]:
    """Declared type at a field path and whether any step is optional.

    Returns ``(None, True)`` when the path leaves the declared part of an open
    record.
    """
    optional = False
    for step in path:
        t = _resolve(t, resolver)
        if not isinstance(t, RecordType):
            return None, True
        f = t.field(step)
        if f is None:
            return None, True
        optional = optional or f.optional
        t = f.type
    return _resolve(t, resolver), optional


_BARE_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z_][A-Za-z0-9_]*)*\Z")


def _field_name(name: str) -> str:
    import json

    return name if _BARE_NAME.match(name) else json.dumps(name)


def print_type(t: TypeExpr, indent: int = 0) -> str:
    """Render a type body in the DDL syntax accepted by ``create type``."""
    if isinstance(t, TypeRef):
        return t.name
    if isinstance(t, ListType):
        return f"[{print_type(t.item, indent)}]"
    if isinstance(t, BagType):
        return f"{{{{ {print_type(t.item, indent)} }}}}"
    pad = "    " * (indent + 1)
    head = "open " if t.open else "closed "
    if not t.fields:
        return head + "{ }"
    body = ",\n".join(
        f"{pad}{_field_name(f.name)}: {print_type(f.type, indent + 1)}{'?' if f.optional else ''}"
        for f in t.fields
    )
    return head + "{\n" + body + "\n" + "    " * indent + "}"
