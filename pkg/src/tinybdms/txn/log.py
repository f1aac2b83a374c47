"""Per-partition write-ahead log.

File layout::

    header  b"TBWAL" + u8 version (1) + u8 reserved
    record* u32 body length, u32 crc32(body), body = ADM record

Every body is an ADM record with at least ``lsn``, ``txn`` and ``kind``
(``update`` | ``commit`` | ``abort``). Update records also carry ``ds``
(dataset id), ``ix`` (index name), ``op`` (``insert`` | ``delete``), ``key``
(ADM list) and, for inserts, ``value``.

Appends are buffered in memory until :meth:`LogManager.force`, which writes and
fsyncs them. A crash before the force therefore loses the buffered records,
the same as losing an OS page cache. A torn or corrupt tail is truncated at
the last record whose checksum verifies.
"""

from __future__ import annotations

import os
import struct
import threading
import zlib
from dataclasses import dataclass

from ..adm.binary import decode, encode
from ..adm.values import Int64
from ..errors import StorageError
from ..faults import LOG_AFTER_FORCE, LOG_BEFORE_FORCE, NoFaults

HEADER = b"TBWAL\x01\x00"
_FRAME = struct.Struct("<II")


@dataclass
class LogRecord:
    lsn: int
    txn: int
    kind: str  # update | commit | abort
    ds: int = 0
    ix: str = ""
    op: str = ""
    key: tuple = ()
    value: object = None

    def to_adm(self) -> dict:
        rec = {"lsn": Int64(self.lsn), "txn": Int64(self.txn), "kind": self.kind}
        if self.kind == "update":
            rec.update({"ds": Int64(self.ds), "ix": self.ix, "op": self.op, "key": list(self.key)})
            if self.op == "insert":
                rec["value"] = self.value
        return rec

    @classmethod
    def from_adm(cls, rec: dict) -> "LogRecord":
        if rec["kind"] != "update":
            return cls(int(rec["lsn"]), int(rec["txn"]), rec["kind"])
        return cls(int(rec["lsn"]), int(rec["txn"]), "update", int(rec["ds"]), rec["ix"], rec["op"],
                   tuple(rec["key"]), rec.get("value"))


def _read_frames(buf: bytes):
    """Yield ``(offset_after, body)`` for each verifiable record; stop at the
    first torn or corrupt one."""
    pos = len(HEADER)
    while pos + _FRAME.size <= len(buf):
        n, crc = _FRAME.unpack_from(buf, pos)
        start = pos + _FRAME.size
        end = start + n
        if end > len(buf):
            return
        body = buf[start:end]
        if zlib.crc32(body) != crc:
            return
        yield end, body
        pos = end


class LogManager:
    def __init__(self, path: str, faults=None, fsync: bool = True):
        self.path = path
        self.faults = faults or NoFaults()
        self.fsync = fsync
        self.lock = threading.Lock()
        self.pending = bytearray()
        self.next_lsn = 1
        self.truncated_bytes = 0
        self.forces = 0
        self._open()

    def _open(self) -> None:
        os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
        if not os.path.exists(self.path) or os.path.getsize(self.path) == 0:
            with open(self.path, "wb") as f:
                f.write(HEADER)
                f.flush()
                os.fsync(f.fileno())
        with open(self.path, "rb") as f:
            buf = f.read()
        if len(buf) < len(HEADER) or buf[:5] != HEADER[:5]:
            raise StorageError(f"{self.path} is not a tinybdms log")
        if buf[5] != HEADER[5]:
            raise StorageError(f"{self.path}: unsupported log version {buf[5]}")
        good = len(HEADER)
        last_lsn = 0
        for end, body in _read_frames(buf):
            rec, _ = decode(body, 0)
            last_lsn = int(rec["lsn"])
            good = end
        if good < len(buf):
            self.truncated_bytes = len(buf) - good
            with open(self.path, "r+b") as f:
                f.truncate(good)
                f.flush()
                os.fsync(f.fileno())
        self.next_lsn = last_lsn + 1
        self.file = open(self.path, "ab", buffering=0)

    def append(self, rec: LogRecord) -> int:
        """Assign the next LSN and buffer the record; returns the LSN."""
        with self.lock:
            rec.lsn = self.next_lsn
            self.next_lsn += 1
            body = encode(rec.to_adm())
            self.pending += _FRAME.pack(len(body), zlib.crc32(body))
            self.pending += body
            return rec.lsn

    def force(self) -> None:
        """Make every appended record durable."""
        self.faults.hit(LOG_BEFORE_FORCE)
        with self.lock:
            if self.pending:
                self.file.write(bytes(self.pending))
                self.pending.clear()
                if self.fsync:
                    os.fsync(self.file.fileno())
                self.forces += 1
        self.faults.hit(LOG_AFTER_FORCE)

    @property
    def last_lsn(self) -> int:
        return self.next_lsn - 1

    def records(self):
        """Durable records, in LSN order."""
        with open(self.path, "rb") as f:
            buf = f.read()
        for _end, body in _read_frames(buf):
            rec, _ = decode(body, 0)
            yield LogRecord.from_adm(rec)

    def close(self) -> None:
        # unforced records are dropped on purpose: they were never committed
        self.pending.clear()
        try:
            self.file.close()
        except OSError:
            pass

    def size(self) -> int:
        return os.path.getsize(self.path)
