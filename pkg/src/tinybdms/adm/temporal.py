"""ISO-8601 parsing/formatting and calendar arithmetic for ADM temporals."""

from __future__ import annotations

import calendar
import datetime as _dt
import re

from .values import Duration

MS_PER_DAY = 86_400_000
EPOCH = _dt.datetime(1970, 1, 1)
EPOCH_DATE = _dt.date(1970, 1, 1)

_DATE = r"(?P<year>\d{4})-(?P<month>\d{2})-(?P<day>\d{2})"
_TIME = (r"(?P<hour>\d{2}):(?P<minute>\d{2}):(?P<second>\d{2})(?:\.(?P<frac>\d{1,3}))?"
         r"(?P<tz>Z|[+-]\d{2}:\d{2})?")
_DATE_RE = re.compile(_DATE + r"\Z")
_TIME_RE = re.compile(_TIME + r"\Z")
_DATETIME_RE = re.compile(_DATE + "T" + _TIME + r"\Z")
_DURATION_RE = re.compile(
    r"(?P<sign>-)?P(?:(?P<years>\d+)Y)?(?:(?P<months>\d+)M)?(?:(?P<days>\d+)D)?"
    r"(?:T(?:(?P<hours>\d+)H)?(?:(?P<minutes>\d+)M)?(?:(?P<seconds>\d+)(?:\.(?P<frac>\d{1,3}))?S)?)?\Z"
)


class TemporalFormatError(ValueError):
    pass


def _tz_offset(tz: str | None) -> _dt.timedelta:
    if not tz or tz == "Z":
        return _dt.timedelta(0)
    sign = -1 if tz[0] == "-" else 1
    return sign * _dt.timedelta(hours=int(tz[1:3]), minutes=int(tz[4:6]))


def _ms(frac: str | None) -> int:
    return int(frac.ljust(3, "0")) if frac else 0


def parse_date(text: str) -> _dt.date:
    m = _DATE_RE.match(text)
    if not m:
        raise TemporalFormatError(f"malformed date literal {text!r}")
    try:
        return _dt.date(int(m["year"]), int(m["month"]), int(m["day"]))
    except ValueError as e:
        raise TemporalFormatError(f"malformed date literal {text!r}: {e}") from None


def parse_time(text: str) -> _dt.time:
    m = _TIME_RE.match(text)
    if not m:
        raise TemporalFormatError(f"malformed time literal {text!r}")
    try:
        t = _dt.datetime(2000, 1, 1, int(m["hour"]), int(m["minute"]), int(m["second"]),
                         _ms(m["frac"]) * 1000)
    except ValueError as e:
        raise TemporalFormatError(f"malformed time literal {text!r}: {e}") from None
    return (t - _tz_offset(m["tz"])).time()


def parse_datetime(text: str) -> _dt.datetime:
    m = _DATETIME_RE.match(text)
    if not m:
        raise TemporalFormatError(f"malformed datetime literal {text!r}")
    try:
        t = _dt.datetime(int(m["year"]), int(m["month"]), int(m["day"]), int(m["hour"]),
                         int(m["minute"]), int(m["second"]), _ms(m["frac"]) * 1000)
    except ValueError as e:
        raise TemporalFormatError(f"malformed datetime literal {text!r}: {e}") from None
    return t - _tz_offset(m["tz"])


def parse_duration(text: str) -> Duration:
    m = _DURATION_RE.match(text)
    if not m or text.rstrip("-") in ("P", "") or text.endswith("T"):
        raise TemporalFormatError(f"malformed duration literal {text!r}")
    g = {k: int(v) if v and k not in ("sign", "frac") else v for k, v in m.groupdict().items()}
    if all(g[k] is None for k in ("years", "months", "days", "hours", "minutes", "seconds")):
        raise TemporalFormatError(f"malformed duration literal {text!r}")
    months = (g["years"] or 0) * 12 + (g["months"] or 0)
    millis = ((g["days"] or 0) * MS_PER_DAY + (g["hours"] or 0) * 3_600_000
              + (g["minutes"] or 0) * 60_000 + (g["seconds"] or 0) * 1000 + _ms(g["frac"]))
    if g["sign"]:
        months, millis = -months, -millis
    return Duration(months, millis)


def format_date(d: _dt.date) -> str:
    return f"{d.year:04d}-{d.month:02d}-{d.day:02d}"


def format_time(t: _dt.time) -> str:
    s = f"{t.hour:02d}:{t.minute:02d}:{t.second:02d}"
    ms = t.microsecond // 1000
    return f"{s}.{ms:03d}" if ms else s


def format_datetime(t: _dt.datetime) -> str:
    return format_date(t) + "T" + format_time(t.time())


def format_duration(d: Duration) -> str:
    months, millis = d.months, d.millis
    sign = "-" if months < 0 or millis < 0 else ""
    months, millis = abs(months), abs(millis)
    out = sign + "P"
    years, months = divmod(months, 12)
    if years:
        out += f"{years}Y"
    if months:
        out += f"{months}M"
    days, rest = divmod(millis, MS_PER_DAY)
    if days:
        out += f"{days}D"
    hours, rest = divmod(rest, 3_600_000)
    minutes, rest = divmod(rest, 60_000)
    seconds, ms = divmod(rest, 1000)
    if hours or minutes or seconds or ms:
        out += "T"
        if hours:
            out += f"{hours}H"
        if minutes:
            out += f"{minutes}M"
        if seconds or ms:
            out += f"{seconds}.{ms:03d}S" if ms else f"{seconds}S"
    if out in ("P", "-P"):
        out = "PT0S"
    return out


def truncate_ms(t: _dt.datetime) -> _dt.datetime:
    return t.replace(microsecond=(t.microsecond // 1000) * 1000)


def add_months(d, months: int):
    if not months:
        return d
    y, m = divmod(d.month - 1 + months, 12)
    y += d.year
    if not 1 <= y <= 9999:
        raise OverflowError("date out of representable range")
    day = min(d.day, calendar.monthrange(y, m + 1)[1])
    return d.replace(year=y, month=m + 1, day=day)


def add_duration(t, d: Duration):
    """Calendar-correct ``t + d`` for date, time and datetime."""
    if isinstance(t, _dt.datetime):
        return add_months(t, d.months) + _dt.timedelta(milliseconds=d.millis)
    if isinstance(t, _dt.date):
        if d.millis % MS_PER_DAY:
            raise ValueError("cannot add a sub-day duration to a date")
        return add_months(t, d.months) + _dt.timedelta(days=d.millis // MS_PER_DAY)
    if isinstance(t, _dt.time):
        if d.months:
            raise ValueError("cannot add a year-month duration to a time")
        ms = (time_to_ms(t) + d.millis) % MS_PER_DAY
        return ms_to_time(ms)
    raise TypeError(f"cannot add a duration to {t!r}")


def time_to_ms(t: _dt.time) -> int:
    return ((t.hour * 60 + t.minute) * 60 + t.second) * 1000 + t.microsecond // 1000


def ms_to_time(ms: int) -> _dt.time:
    return (_dt.datetime(2000, 1, 1) + _dt.timedelta(milliseconds=ms)).time()


def datetime_to_ms(t: _dt.datetime) -> int:
    return (t - EPOCH) // _dt.timedelta(milliseconds=1)


def ms_to_datetime(ms: int) -> _dt.datetime:
    return EPOCH + _dt.timedelta(milliseconds=ms)


def difference(a, b) -> Duration:
    """``a - b`` for two temporals of the same type, as a day-time duration."""
    if isinstance(a, _dt.datetime) and isinstance(b, _dt.datetime):
        return Duration(0, datetime_to_ms(a) - datetime_to_ms(b))
    if isinstance(a, _dt.date) and isinstance(b, _dt.date) and not isinstance(a, _dt.datetime) \
            and not isinstance(b, _dt.datetime):
        return Duration(0, (a - b).days * MS_PER_DAY)
    if isinstance(a, _dt.time) and isinstance(b, _dt.time):
        return Duration(0, time_to_ms(a) - time_to_ms(b))
    raise TypeError("temporal difference needs two values of the same type")
