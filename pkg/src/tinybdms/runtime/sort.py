"""External merge sort with a byte budget.

Run generation buffers tuples until their encoded size exceeds the budget,
sorts the buffer and spills it to a temporary run file; the merge phase
streams all runs (plus the in-memory tail) through a k-way heap merge.
"""

from __future__ import annotations

import heapq
import os
import pickle
import struct
import tempfile

from ..adm.binary import encode

DEFAULT_SORT_BUDGET = 4 << 20
_LEN = struct.Struct("<I")


def _write_run(items, directory: str | None) -> str:
    fd, path = tempfile.mkstemp(prefix="run-", suffix=".bin", dir=directory)
    with os.fdopen(fd, "wb") as f:
        for t in items:
            blob = pickle.dumps(t, protocol=pickle.HIGHEST_PROTOCOL)
            f.write(_LEN.pack(len(blob)))
            f.write(blob)
    return path


def _read_run(path: str):
    try:
        with open(path, "rb") as f:
            while True:
                head = f.read(_LEN.size)
                if not head:
                    return
                (n,) = _LEN.unpack(head)
                yield pickle.loads(f.read(n))
    finally:
        os.unlink(path)


def tuple_size(t) -> int:
    """Approximate in-memory footprint: the encoded size of the tuple's values."""
    if isinstance(t, dict):
        return sum(len(encode(v)) for v in t.values()) + 16 * len(t)
    return len(encode(t))


class ExternalSorter:
    def __init__(self, key, budget: int = DEFAULT_SORT_BUDGET, temp_dir: str | None = None):
        self.key = key
        self.budget = budget
        self.temp_dir = temp_dir
        self.buffer: list = []
        self.used = 0
        self.runs: list[str] = []

    def add(self, t) -> None:
        self.buffer.append(t)
        self.used += tuple_size(t)
        if self.used > self.budget:
            self._spill()

    def _spill(self) -> None:
        self.buffer.sort(key=self.key)
        self.runs.append(_write_run(self.buffer, self.temp_dir))
        self.buffer = []
        self.used = 0

    @property
    def spilled_runs(self) -> int:
        return len(self.runs)

    def sorted(self):
        """Merged output; consumes the sorter."""
        self.buffer.sort(key=self.key)
        if not self.runs:
            out, self.buffer = self.buffer, []
            return iter(out)
        streams = [_read_run(p) for p in self.runs] + [iter(self.buffer)]
        self.runs, self.buffer = [], []
        return heapq.merge(*streams, key=self.key)

    def discard(self) -> None:
        for p in self.runs:
            try:
                os.unlink(p)
            except OSError:
                pass
        self.runs, self.buffer = [], []
