"""Temporal functions."""

from __future__ import annotations

import datetime as _dt

from ..adm import temporal as T
from ..adm.values import Duration, Interval, type_name
from ..errors import QueryError, TypeMismatch


def _is_date(v) -> bool:
    return isinstance(v, _dt.date) and not isinstance(v, _dt.datetime)


def _want(v, kind, fn: str):
    ok = {
        "datetime": isinstance(v, _dt.datetime),
        "date": _is_date(v),
        "time": isinstance(v, _dt.time),
        "duration": isinstance(v, Duration),
        "interval": isinstance(v, Interval),
    }[kind]
    if not ok:
        raise TypeMismatch(f"{fn} expects a {kind}, got {type_name(v)}")
    return v


def current_datetime(now: _dt.datetime) -> _dt.datetime:
    return T.truncate_ms(now)


def current_date(now: _dt.datetime) -> _dt.date:
    return now.date()


def current_time(now: _dt.datetime) -> _dt.time:
    return T.truncate_ms(now).time()


def datetime_subtract(a, b) -> Duration:
    """``a - b`` for two datetimes as a day-time duration."""
    return T.difference(_want(a, "datetime", "subtract-datetime"), _want(b, "datetime", "subtract-datetime"))


def date_subtract(a, b) -> Duration:
    return T.difference(_want(a, "date", "subtract-date"), _want(b, "date", "subtract-date"))


def time_subtract(a, b) -> Duration:
    return T.difference(_want(a, "time", "subtract-time"), _want(b, "time", "subtract-time"))


def subtract_duration(t, d):
    _want(d, "duration", "subtract-duration")
    try:
        return T.add_duration(t, -d)
    except OverflowError as e:
        raise QueryError(f"temporal overflow: {e}") from None
    except (ValueError, TypeError) as e:
        raise TypeMismatch(str(e)) from None


def add_duration(t, d):
    _want(d, "duration", "add-duration")
    try:
        return T.add_duration(t, d)
    except OverflowError as e:
        raise QueryError(f"temporal overflow: {e}") from None
    except (ValueError, TypeError) as e:
        raise TypeMismatch(str(e)) from None


def _months(t) -> int:
    return t.year * 12 + (t.month - 1)


def interval_bin(t, anchor, size: Duration) -> Interval:
    """The half-open bin ``[start, start + size)`` containing ``t``; bins are
    aligned to ``anchor``."""
    if type(t) is not type(anchor):
        raise TypeMismatch("interval-bin needs a value and an anchor of the same temporal type")
    _want(size, "duration", "interval-bin")
    if size.months and size.millis:
        raise QueryError("interval-bin needs a pure year-month or day-time duration")
    if size.months == 0 and size.millis == 0:
        raise QueryError("interval-bin size must be non-zero")
    if size.months:
        if isinstance(t, _dt.time):
            raise TypeMismatch("cannot bin a time by a year-month duration")
        k = (_months(t) - _months(anchor)) // size.months
        # months arithmetic can land after t when anchor's day is later in the month
        start = T.add_months(anchor, k * size.months)
        if start > t:
            k -= 1
            start = T.add_months(anchor, k * size.months)
        return Interval(start, T.add_months(anchor, (k + 1) * size.months))
    step = size.millis
    if isinstance(t, _dt.datetime):
        k = (T.datetime_to_ms(t) - T.datetime_to_ms(anchor)) // step
        start = anchor + _dt.timedelta(milliseconds=k * step)
        return Interval(start, start + _dt.timedelta(milliseconds=step))
    if _is_date(t):
        if step % T.MS_PER_DAY:
            raise QueryError("cannot bin a date by a sub-day duration")
        days = step // T.MS_PER_DAY
        k = (t - anchor).days // days
        start = anchor + _dt.timedelta(days=k * days)
        return Interval(start, start + _dt.timedelta(days=days))
    k = (T.time_to_ms(t) - T.time_to_ms(anchor)) // step
    start = T.time_to_ms(anchor) + k * step
    end = start + step
    if start < 0 or end > T.MS_PER_DAY:
        raise QueryError("time bin leaves the day")
    return Interval(T.ms_to_time(start), T.ms_to_time(end % T.MS_PER_DAY) if end < T.MS_PER_DAY else _dt.time(23, 59, 59, 999000))


def interval_start_from(t, d: Duration) -> Interval:
    _want(d, "duration", "interval-start-from")
    try:
        return Interval(t, T.add_duration(t, d))
    except ValueError as e:
        raise QueryError(str(e)) from None


def interval_from(a, b) -> Interval:
    try:
        return Interval(a, b)
    except ValueError as e:
        raise QueryError(str(e)) from None


def get_interval_start(i):
    return _want(i, "interval", "get-interval-start").start


def get_interval_end(i):
    return _want(i, "interval", "get-interval-end").end


def _field(attr: str, fn: str):
    def get(v):
        if isinstance(v, Duration):
            if attr == "year":
                return v.months // 12 if v.months >= 0 else -((-v.months) // 12)
            if attr == "month":
                return v.months % 12 if v.months >= 0 else -((-v.months) % 12)
            ms = abs(v.millis)
            sign = -1 if v.millis < 0 else 1
            parts = {"day": ms // T.MS_PER_DAY, "hour": ms // 3_600_000 % 24,
                     "minute": ms // 60_000 % 60, "second": ms // 1000 % 60, "millisecond": ms % 1000}
            return sign * parts[attr]
        if attr == "millisecond":
            if isinstance(v, (_dt.datetime, _dt.time)):
                return v.microsecond // 1000
        elif hasattr(v, attr) and isinstance(v, (_dt.date, _dt.time)):
            return getattr(v, attr)
        raise TypeMismatch(f"{fn} not defined on {type_name(v)}")
    return get


get_year = _field("year", "get-year")
get_month = _field("month", "get-month")
get_day = _field("day", "get-day")
get_hour = _field("hour", "get-hour")
get_minute = _field("minute", "get-minute")
get_second = _field("second", "get-second")
get_millisecond = _field("millisecond", "get-millisecond")


def get_date_from_datetime(v) -> _dt.date:
    return _want(v, "datetime", "get-date-from-datetime").date()


def get_time_from_datetime(v) -> _dt.time:
    return _want(v, "datetime", "get-time-from-datetime").time()


def datetime_from_date_time(d, t) -> _dt.datetime:
    return _dt.datetime.combine(_want(d, "date", "datetime-from-date-time"), _want(t, "time", "datetime-from-date-time"))


def interval_overlaps(a, b) -> bool:
    _want(a, "interval", "interval-overlaps")
    _want(b, "interval", "interval-overlaps")
    if type(a.start) is not type(b.start):
        raise TypeMismatch("intervals over different temporal types")
    return a.start < b.end and b.start < a.end


def interval_covers(a, b) -> bool:
    _want(a, "interval", "interval-covers")
    _want(b, "interval", "interval-covers")
    return a.start <= b.start and b.end <= a.end
