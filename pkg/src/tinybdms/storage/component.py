"""Immutable on-disk LSM components.

A component is one file ``<lo>-<hi>.dat`` plus an empty marker file
``<lo>-<hi>.valid``. ``lo``/``hi`` are the flush sequence numbers the
component covers: a flush writes ``n-n``, a merge of ``a-b`` ... ``c-d`` writes
``a-d``. The marker is created last (and fsynced); a component without it is
garbage.

File layout (little-endian)::

    magic  b"TBLSM" + u8 version + u8 reserved
    entry* u32 length, body = u8 flag (0 put, 1 antimatter),
           ADM list (the key), ADM value (only for puts)
    footer ADM record {count, min-key, max-key, min-lsn, max-lsn}
    tail   u64 footer offset, b"TBEND"
"""

from __future__ import annotations

import bisect
import os
import re
import struct
from dataclasses import dataclass, field

from ..adm.binary import decode, encode
from ..adm.compare import key_of
from ..adm.values import Int64
from ..errors import StorageError
from .rtree import RTree

MAGIC = b"TBLSM\x01\x00"
TAIL = b"TBEND"
_U4 = struct.Struct("<I")
_U8 = struct.Struct("<Q")

PUT = 0
ANTI = 1


class _Antimatter:
    __slots__ = ()

    def __repr__(self) -> str:
        return "ANTIMATTER"


ANTIMATTER = _Antimatter()
ABSENT = object()  # lookup miss (a put value may itself be null)

_NAME = re.compile(r"(\d+)-(\d+)\.dat\Z")


def component_name(lo: int, hi: int) -> str:
    return f"{lo:08d}-{hi:08d}"


def parse_name(filename: str):
    m = _NAME.match(filename)
    return (int(m.group(1)), int(m.group(2))) if m else None


def _fsync_dir(path: str) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def write_component(directory: str, lo: int, hi: int, entries, min_lsn: int, max_lsn: int) -> str:
    """Write the data file for ``entries`` (sorted ``(key, value)`` pairs).

    The validity marker is *not* written; see :func:`mark_valid`.
    """
    path = os.path.join(directory, component_name(lo, hi) + ".dat")
    count = 0
    first = last = None
    with open(path, "wb") as f:
        f.write(MAGIC)
        for key, value in entries:
            body = bytearray()
            body.append(ANTI if value is ANTIMATTER else PUT)
            body += encode(list(key))
            if value is not ANTIMATTER:
                body += encode(value)
            f.write(_U4.pack(len(body)))
            f.write(body)
            if first is None:
                first = key
            last = key
            count += 1
        offset = f.tell()
        footer = {
            "count": Int64(count),
            "min-key": list(first) if first is not None else None,
            "max-key": list(last) if last is not None else None,
            "min-lsn": Int64(min_lsn),
            "max-lsn": Int64(max_lsn),
        }
        f.write(encode(footer))
        f.write(_U8.pack(offset))
        f.write(TAIL)
        f.flush()
        os.fsync(f.fileno())
    return path


def mark_valid(directory: str, lo: int, hi: int) -> None:
    path = os.path.join(directory, component_name(lo, hi) + ".valid")
    with open(path, "wb") as f:
        f.flush()
        os.fsync(f.fileno())
    _fsync_dir(directory)


def is_valid(directory: str, lo: int, hi: int) -> bool:
    return os.path.exists(os.path.join(directory, component_name(lo, hi) + ".valid"))


def remove_component(directory: str, lo: int, hi: int) -> None:
    base = os.path.join(directory, component_name(lo, hi))
    # marker first: a half-removed component must never look valid
    for ext in (".valid", ".dat"):
        try:
            os.remove(base + ext)
        except FileNotFoundError:
            pass


@dataclass
class DiskComponent:
    """A loaded, immutable component. Entries are held in memory, in key order."""

    directory: str
    lo: int
    hi: int
    keys: list
    values: list
    min_lsn: int = 0
    max_lsn: int = 0
    sort_keys: list = field(default_factory=list)
    _rtree: RTree | None = None

    @property
    def name(self) -> str:
        return component_name(self.lo, self.hi)

    def __len__(self) -> int:
        return len(self.keys)

    @classmethod
    def load(cls, directory: str, lo: int, hi: int) -> "DiskComponent":
        path = os.path.join(directory, component_name(lo, hi) + ".dat")
        with open(path, "rb") as f:
            buf = f.read()
        if not buf.startswith(MAGIC[:5]) or not buf.endswith(TAIL):
            raise StorageError(f"corrupt component {path}")
        if buf[5] != MAGIC[5]:
            raise StorageError(f"component {path} has unsupported version {buf[5]}")
        end = len(buf) - len(TAIL) - 8
        footer_at = _U8.unpack_from(buf, end)[0]
        footer, _ = decode(buf, footer_at)
        keys, values = [], []
        pos = len(MAGIC)
        while pos < footer_at:
            n = _U4.unpack_from(buf, pos)[0]
            pos += 4
            flag = buf[pos]
            key, p = decode(buf, pos + 1)
            if flag == PUT:
                value, p = decode(buf, p)
            else:
                value = ANTIMATTER
            if p != pos + n:
                raise StorageError(f"corrupt entry at offset {pos} in {path}")
            keys.append(tuple(key))
            values.append(value)
            pos = p
        if len(keys) != footer["count"]:
            raise StorageError(f"component {path}: footer count mismatch")
        comp = cls(directory, lo, hi, keys, values, int(footer["min-lsn"]), int(footer["max-lsn"]))
        comp.sort_keys = [key_of(k) for k in keys]
        return comp

    @classmethod
    def from_entries(cls, directory, lo, hi, entries, min_lsn, max_lsn) -> "DiskComponent":
        keys = [k for k, _ in entries]
        comp = cls(directory, lo, hi, keys, [v for _, v in entries], min_lsn, max_lsn)
        comp.sort_keys = [key_of(k) for k in keys]
        return comp

    def get(self, sk):
        i = bisect.bisect_left(self.sort_keys, sk)
        if i < len(self.sort_keys) and self.sort_keys[i] == sk:
            return self.values[i]
        return ABSENT

    def range(self, lo_bound, hi_bound):
        """Entries with ``lo_bound <= sort key < hi_bound`` (None = unbounded)."""
        i = 0 if lo_bound is None else bisect.bisect_left(self.sort_keys, lo_bound)
        j = len(self.sort_keys) if hi_bound is None else bisect.bisect_left(self.sort_keys, hi_bound)
        for k in range(i, j):
            yield self.sort_keys[k], self.keys[k], self.values[k]

    def rtree(self, mbr_of) -> RTree:
        if self._rtree is None:
            t = RTree()
            for i, k in enumerate(self.keys):
                box = mbr_of(k[0])
                if box is not None:
                    t.insert(box, i)
            self._rtree = t
        return self._rtree

    def spatial(self, box, mbr_of):
        for i in self.rtree(mbr_of).search(box):
            yield self.sort_keys[i], self.keys[i], self.values[i]
