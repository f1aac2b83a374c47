"""Hybrid hash join table.

The build side is hashed in memory until its size exceeds the budget. From
then on the key space is split into ``fanout`` buckets: bucket 0 stays in
memory, the others are written to temporary files, and probe tuples whose
key falls into a spilled bucket are spilled alongside. After the probe input
ends, every spilled bucket is joined by loading its build file.

Keys are canonical byte encodings of the key values (so 1 and 1.0 match); a
key containing null never matches.
"""

from __future__ import annotations

import os
import pickle
import tempfile
import zlib

from ..adm.binary import encode_key_tuple
from .sort import _LEN, tuple_size

DEFAULT_JOIN_BUDGET = 4 << 20


def join_key(values) -> bytes | None:
    if any(v is None for v in values):
        return None
    return encode_key_tuple(values)


class _SpillFile:
    def __init__(self, directory):
        fd, self.path = tempfile.mkstemp(prefix="hj-", suffix=".bin", dir=directory)
        self.f = os.fdopen(fd, "wb")

    def write(self, item) -> None:
        blob = pickle.dumps(item, protocol=pickle.HIGHEST_PROTOCOL)
        self.f.write(_LEN.pack(len(blob)))
        self.f.write(blob)

    def read(self):
        self.f.close()
        try:
            with open(self.path, "rb") as f:
                while True:
                    head = f.read(_LEN.size)
                    if not head:
                        return
                    (n,) = _LEN.unpack(head)
                    yield pickle.loads(f.read(n))
        finally:
            os.unlink(self.path)

    def discard(self) -> None:
        self.f.close()
        try:
            os.unlink(self.path)
        except OSError:
            pass


class HybridHashTable:
    def __init__(self, budget: int = DEFAULT_JOIN_BUDGET, fanout: int = 8, temp_dir: str | None = None):
        self.budget = budget
        self.fanout = fanout
        self.temp_dir = temp_dir
        self.table: dict = {}
        self.used = 0
        self.spilled = False
        self.build_files: list = []
        self.probe_files: list = []

    def _bucket(self, key: bytes) -> int:
        return zlib.crc32(key) % self.fanout

    def add(self, key: bytes | None, t) -> None:
        if key is None:
            return
        if self.spilled:
            b = self._bucket(key)
            if b:
                self.build_files[b].write((key, t))
                return
        self.table.setdefault(key, []).append(t)
        self.used += tuple_size(t)
        if not self.spilled and self.used > self.budget:
            self._spill()

    def _spill(self) -> None:
        self.spilled = True
        self.build_files = [None] + [_SpillFile(self.temp_dir) for _ in range(self.fanout - 1)]
        self.probe_files = [None] + [_SpillFile(self.temp_dir) for _ in range(self.fanout - 1)]
        keep = {}
        for key, ts in self.table.items():
            b = self._bucket(key)
            if b:
                for t in ts:
                    self.build_files[b].write((key, t))
            else:
                keep[key] = ts
        self.table = keep

    def probe(self, key: bytes | None, t):
        """Matches of ``t`` now; tuples routed to a spilled bucket yield none
        here and are joined by :meth:`finish`."""
        if key is None:
            return ()
        if self.spilled:
            b = self._bucket(key)
            if b:
                self.probe_files[b].write((key, t))
                return ()
        return self.table.get(key, ())

    def finish(self):
        """Yield ``(probe_tuple, build_tuple)`` pairs of the spilled buckets."""
        self.table = {}
        if not self.spilled:
            return
        for b in range(1, self.fanout):
            table: dict = {}
            for key, t in self.build_files[b].read():
                table.setdefault(key, []).append(t)
            for key, t in self.probe_files[b].read():
                for m in table.get(key, ()):
                    yield t, m

    def discard(self) -> None:
        for f in self.build_files[1:] + self.probe_files[1:]:
            f.discard()
