"""Operator semantics: arithmetic, comparison and three-valued boolean logic.

Every operator propagates null: if an operand is null the result is null.
Comparisons between values of different classes are never equal; ordering them
(``<`` etc.) is a query error.
"""

from __future__ import annotations

import datetime as _dt
import math

from ..adm.compare import Ordering, compare_values
from ..adm.temporal import add_duration, difference
from ..adm.values import Duration, Int64, adm_equal, check_int32, check_int64, is_numeric, type_name
from ..errors import QueryError, TypeMismatch


def _int_result(a, b, n: int):
    if isinstance(a, Int64) or isinstance(b, Int64):
        return check_int64(n)
    return check_int32(n)


def _temporal(v) -> bool:
    return isinstance(v, (_dt.date, _dt.time))


def add(a, b):
    if a is None or b is None:
        return None
    if is_numeric(a) and is_numeric(b):
        if isinstance(a, float) or isinstance(b, float):
            return float(a) + float(b)
        return _int_result(a, b, a + b)
    try:
        if _temporal(a) and isinstance(b, Duration):
            return add_duration(a, b)
        if isinstance(a, Duration) and _temporal(b):
            return add_duration(b, a)
        if isinstance(a, Duration) and isinstance(b, Duration):
            return Duration(a.months + b.months, a.millis + b.millis)
    except (ValueError, OverflowError) as e:
        raise QueryError(str(e)) from None
    raise TypeMismatch(f"cannot add {type_name(a)} and {type_name(b)}")


def sub(a, b):
    if a is None or b is None:
        return None
    if is_numeric(a) and is_numeric(b):
        if isinstance(a, float) or isinstance(b, float):
            return float(a) - float(b)
        return _int_result(a, b, a - b)
    try:
        if _temporal(a) and isinstance(b, Duration):
            return add_duration(a, -b)
        if _temporal(a) and _temporal(b):
            return difference(a, b)
        if isinstance(a, Duration) and isinstance(b, Duration):
            return Duration(a.months - b.months, a.millis - b.millis)
    except (ValueError, OverflowError, TypeError) as e:
        raise QueryError(str(e)) from None
    raise TypeMismatch(f"cannot subtract {type_name(b)} from {type_name(a)}")


def mul(a, b):
    if a is None or b is None:
        return None
    if is_numeric(a) and is_numeric(b):
        if isinstance(a, float) or isinstance(b, float):
            return float(a) * float(b)
        return _int_result(a, b, a * b)
    raise TypeMismatch(f"cannot multiply {type_name(a)} and {type_name(b)}")


def div(a, b):
    """``/`` always yields a double."""
    if a is None or b is None:
        return None
    if is_numeric(a) and is_numeric(b):
        if b == 0:
            if a == 0 or (isinstance(a, float) and math.isnan(a)):
                return math.nan
            if isinstance(a, float) or isinstance(b, float):
                return math.copysign(math.inf, a) * math.copysign(1.0, b)
            raise QueryError("division by zero")
        return float(a) / float(b)
    raise TypeMismatch(f"cannot divide {type_name(a)} by {type_name(b)}")


def mod(a, b):
    if a is None or b is None:
        return None
    if is_numeric(a) and is_numeric(b):
        if b == 0:
            raise QueryError("modulo by zero")
        if isinstance(a, float) or isinstance(b, float):
            return math.fmod(float(a), float(b))
        # truncated remainder, sign follows the dividend
        r = abs(a) % abs(b)
        return _int_result(a, b, -r if a < 0 else r)
    raise TypeMismatch(f"cannot take {type_name(a)} modulo {type_name(b)}")


def neg(a):
    if a is None:
        return None
    if is_numeric(a):
        if isinstance(a, float):
            return -a
        return check_int64(-a) if isinstance(a, Int64) else check_int32(-a)
    if isinstance(a, Duration):
        return -a
    raise TypeMismatch(f"cannot negate {type_name(a)}")


def eq(a, b):
    if a is None or b is None:
        return None
    o = compare_values(a, b)
    if o is Ordering.INCOMPARABLE:
        return False
    if o is Ordering.EQUAL:
        return adm_equal(a, b) if not is_numeric(a) else True
    return False


def ne(a, b):
    r = eq(a, b)
    return None if r is None else not r


def _order(a, b, op: str) -> Ordering | None:
    if a is None or b is None:
        return None
    o = compare_values(a, b)
    if o is Ordering.INCOMPARABLE:
        if is_numeric(a) and is_numeric(b):
            return o  # NaN: every ordering comparison is false
        raise TypeMismatch(f"cannot compare {type_name(a)} {op} {type_name(b)}")
    return o


def lt(a, b):
    o = _order(a, b, "<")
    return None if o is None else o is Ordering.LESS


def le(a, b):
    o = _order(a, b, "<=")
    return None if o is None else o in (Ordering.LESS, Ordering.EQUAL)


def gt(a, b):
    o = _order(a, b, ">")
    return None if o is None else o is Ordering.GREATER


def ge(a, b):
    o = _order(a, b, ">=")
    return None if o is None else o in (Ordering.GREATER, Ordering.EQUAL)


def _bool(v, op: str):
    if v is None or isinstance(v, bool):
        return v
    raise TypeMismatch(f"{op} expects boolean operands, got {type_name(v)}")


def and_(a, b):
    a, b = _bool(a, "and"), _bool(b, "and")
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def or_(a, b):
    a, b = _bool(a, "or"), _bool(b, "or")
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def not_(a):
    a = _bool(a, "not")
    return None if a is None else not a


def truthy(v) -> bool:
    """Filter semantics: only ``true`` passes; null and false are dropped."""
    if v is True:
        return True
    if v is None or v is False:
        return False
    raise TypeMismatch(f"condition must be boolean, got {type_name(v)}")


BINARY_OPS = {
    "+": add, "-": sub, "*": mul, "/": div, "%": mod, "mod": mod,
    "=": eq, "!=": ne, "<": lt, "<=": le, ">": gt, ">=": ge,
    "and": and_, "or": or_,
}
