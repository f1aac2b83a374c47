"""Binary encoding of ADM values.

Each value is a one-byte tag followed by a fixed or length-prefixed payload
(little-endian)::

    0 null | 1 false | 2 true | 3 int32 i4 | 4 int64 i8 | 5 double f8
    6 string u4 len + utf-8 | 7 date i4 days since 1970-01-01
    8 time i4 ms of day | 9 datetime i8 ms since epoch
    10 duration i4 months + i8 ms | 11 interval <value> <value>
    12 point f8 f8 | 13 line 4*f8 | 14 rectangle 4*f8 | 15 circle 3*f8
    16 polygon u4 n + n*(f8 f8) | 17 list u4 n + items | 18 bag u4 n + items
    19 record u4 n + n*(u4 len + utf-8 name, value)

``encode(v)`` preserves types exactly and is used for storage and the log.
``encode_key(v)`` is the canonical form used for hashing and key equality:
integers of either width and integral doubles share one encoding, bag items are
sorted and record fields are ordered by name.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import struct

from .temporal import EPOCH_DATE, datetime_to_ms, ms_to_datetime, ms_to_time, time_to_ms
from ..errors import ArithmeticOverflow
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

_I4 = struct.Struct("<i")
_U4 = struct.Struct("<I")
_I8 = struct.Struct("<q")
_F8 = struct.Struct("<d")
_F8x2 = struct.Struct("<dd")
_F8x3 = struct.Struct("<ddd")
_F8x4 = struct.Struct("<dddd")
_DUR = struct.Struct("<iq")

HASH_SEED = b"tinybdms-partition-v1"


def _enc(v, out: bytearray, canonical: bool) -> None:
    if v is None:
        out.append(0)
    elif v is True:
        out.append(2)
    elif v is False:
        out.append(1)
    elif isinstance(v, int):
        if not INT64_MIN <= v <= INT64_MAX:
            raise ArithmeticOverflow(f"integer out of int64 range: {v}")
        if canonical or isinstance(v, Int64) or not INT32_MIN <= v <= INT32_MAX:
            out.append(4)
            out += _I8.pack(v)
        else:
            out.append(3)
            out += _I4.pack(v)
    elif isinstance(v, float):
        if canonical and v.is_integer() and INT64_MIN <= v <= INT64_MAX:
            out.append(4)
            out += _I8.pack(int(v))
        else:
            out.append(5)
            out += _F8.pack(v)
    elif isinstance(v, str):
        b = v.encode("utf-8")
        out.append(6)
        out += _U4.pack(len(b))
        out += b
    elif isinstance(v, _dt.datetime):
        out.append(9)
        out += _I8.pack(datetime_to_ms(v))
    elif isinstance(v, _dt.date):
        out.append(7)
        out += _I4.pack((v - EPOCH_DATE).days)
    elif isinstance(v, _dt.time):
        out.append(8)
        out += _I4.pack(time_to_ms(v))
    elif isinstance(v, dict):
        out.append(19)
        out += _U4.pack(len(v))
        items = sorted(v.items()) if canonical else v.items()
        for k, x in items:
            b = k.encode("utf-8")
            out += _U4.pack(len(b))
            out += b
            _enc(x, out, canonical)
    elif isinstance(v, list):
        out.append(17)
        out += _U4.pack(len(v))
        for x in v:
            _enc(x, out, canonical)
    elif isinstance(v, Bag):
        out.append(18)
        out += _U4.pack(len(v.items))
        if canonical:
            for b in sorted(encode_key(x) for x in v.items):
                out += b
        else:
            for x in v.items:
                _enc(x, out, canonical)
    elif isinstance(v, Duration):
        out.append(10)
        out += _DUR.pack(v.months, v.millis)
    elif isinstance(v, Interval):
        out.append(11)
        _enc(v.start, out, canonical)
        _enc(v.end, out, canonical)
    elif isinstance(v, Point):
        out.append(12)
        out += _F8x2.pack(v.x, v.y)
    elif isinstance(v, Line):
        out.append(13)
        out += _F8x4.pack(v.p1.x, v.p1.y, v.p2.x, v.p2.y)
    elif isinstance(v, Rectangle):
        out.append(14)
        out += _F8x4.pack(v.low.x, v.low.y, v.high.x, v.high.y)
    elif isinstance(v, Circle):
        out.append(15)
        out += _F8x3.pack(v.center.x, v.center.y, v.radius)
    elif isinstance(v, Polygon):
        out.append(16)
        out += _U4.pack(len(v.points))
        for p in v.points:
            out += _F8x2.pack(p.x, p.y)
    else:
        raise TypeError(f"cannot encode {v!r}")


def encode(v) -> bytes:
    out = bytearray()
    _enc(v, out, False)
    return bytes(out)


def encode_key(v) -> bytes:
    out = bytearray()
    _enc(v, out, True)
    return bytes(out)


def encode_key_tuple(values) -> bytes:
    out = bytearray()
    for v in values:
        _enc(v, out, True)
    return bytes(out)


def _dec(buf, pos: int):
    tag = buf[pos]
    pos += 1
    if tag == 0:
        return None, pos
    if tag == 1:
        return False, pos
    if tag == 2:
        return True, pos
    if tag == 3:
        return _I4.unpack_from(buf, pos)[0], pos + 4
    if tag == 4:
        return Int64(_I8.unpack_from(buf, pos)[0]), pos + 8
    if tag == 5:
        return _F8.unpack_from(buf, pos)[0], pos + 8
    if tag == 6:
        n = _U4.unpack_from(buf, pos)[0]
        pos += 4
        return bytes(buf[pos:pos + n]).decode("utf-8"), pos + n
    if tag == 19:
        n = _U4.unpack_from(buf, pos)[0]
        pos += 4
        rec = {}
        for _ in range(n):
            k = _U4.unpack_from(buf, pos)[0]
            pos += 4
            name = bytes(buf[pos:pos + k]).decode("utf-8")
            pos += k
            rec[name], pos = _dec(buf, pos)
        return rec, pos
    if tag in (17, 18):
        n = _U4.unpack_from(buf, pos)[0]
        pos += 4
        items = []
        for _ in range(n):
            x, pos = _dec(buf, pos)
            items.append(x)
        return (items if tag == 17 else Bag(items)), pos
    if tag == 9:
        return ms_to_datetime(_I8.unpack_from(buf, pos)[0]), pos + 8
    if tag == 7:
        return EPOCH_DATE + _dt.timedelta(days=_I4.unpack_from(buf, pos)[0]), pos + 4
    if tag == 8:
        return ms_to_time(_I4.unpack_from(buf, pos)[0]), pos + 4
    if tag == 10:
        m, ms = _DUR.unpack_from(buf, pos)
        return Duration(m, ms), pos + 12
    if tag == 11:
        a, pos = _dec(buf, pos)
        b, pos = _dec(buf, pos)
        return Interval(a, b), pos
    if tag == 12:
        return Point(*_F8x2.unpack_from(buf, pos)), pos + 16
    if tag == 13:
        x1, y1, x2, y2 = _F8x4.unpack_from(buf, pos)
        return Line(Point(x1, y1), Point(x2, y2)), pos + 32
    if tag == 14:
        x1, y1, x2, y2 = _F8x4.unpack_from(buf, pos)
        return Rectangle(Point(x1, y1), Point(x2, y2)), pos + 32
    if tag == 15:
        x, y, r = _F8x3.unpack_from(buf, pos)
        return Circle(Point(x, y), r), pos + 24
    if tag == 16:
        n = _U4.unpack_from(buf, pos)[0]
        pos += 4
        pts = []
        for _ in range(n):
            pts.append(Point(*_F8x2.unpack_from(buf, pos)))
            pos += 16
        return Polygon(tuple(pts)), pos
    raise ValueError(f"bad ADM tag {tag} at offset {pos - 1}")


def decode(buf, pos: int = 0):
    """Decode one value; returns ``(value, next_offset)``."""
    return _dec(buf, pos)


def decode_value(buf):
    v, pos = _dec(buf, 0)
    if pos != len(buf):
        raise ValueError("trailing bytes after ADM value")
    return v


def hash64(values, seed: bytes = HASH_SEED) -> int:
    """Seeded 64-bit hash over the canonical encoding of a key tuple."""
    h = hashlib.blake2b(encode_key_tuple(values), digest_size=8, key=seed)
    return int.from_bytes(h.digest(), "little")
