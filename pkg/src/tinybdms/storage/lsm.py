"""One partition of one LSM-ified index.

An index is a mutable in-memory component (a sorted map) plus a list of
immutable disk components, newest first. Reads merge all components with
newest-wins semantics; a delete writes an antimatter entry that hides older
entries for the same key until a full merge drops both.

Keys are tuples of ADM values ordered by :func:`key_of`. Range bounds are
key prefixes, so a secondary index keyed ``(value, *pk)`` can be probed on
``value`` alone.
"""

from __future__ import annotations

import heapq
import os
import threading
from dataclasses import dataclass

from sortedcontainers import SortedDict

from ..adm.binary import encode
from ..adm.compare import TOP, key_of
from ..errors import IndexClosed, UnsortedInput
from ..faults import (
    FLUSH_AFTER_VALID,
    FLUSH_BEFORE_VALID,
    MERGE_AFTER_VALID,
    MERGE_BEFORE_VALID,
    NoFaults,
)
from .component import (
    ABSENT,
    ANTIMATTER,
    DiskComponent,
    is_valid,
    mark_valid,
    parse_name,
    remove_component,
    write_component,
)

DEFAULT_MEMORY_BUDGET = 1 << 20
DEFAULT_MERGE_K = 4
ENTRY_OVERHEAD = 32


@dataclass
class OpenReport:
    """What ``LsmIndex.open`` found on disk."""

    loaded: list
    removed_invalid: list
    removed_covered: list


def bounds(lo=None, hi=None, lo_inclusive=True, hi_inclusive=True):
    """Translate prefix bounds into half-open sort-key bounds ``[a, b)``."""
    a = b = None
    if lo is not None:
        a = key_of(lo) if lo_inclusive else key_of(lo) + (TOP,)
    if hi is not None:
        b = key_of(hi) + (TOP,) if hi_inclusive else key_of(hi)
    return a, b


def _resolve(streams):
    """Merge per-component sorted streams (listed newest first), newest wins,
    antimatter hides. Yields ``(key, value)``."""
    tagged = [((sk, rank, key, value) for sk, key, value in s) for rank, s in enumerate(streams)]
    last = None
    for sk, _rank, key, value in heapq.merge(*tagged, key=lambda t: (t[0], t[1])):
        if sk == last:
            continue
        last = sk
        if value is not ANTIMATTER:
            yield key, value


class LsmIndex:
    def __init__(self, directory: str, *, spatial: bool = False, memory_budget: int = DEFAULT_MEMORY_BUDGET,
                 merge_k: int = DEFAULT_MERGE_K, faults=None, mbr_of=None, name: str = ""):
        self.directory = directory
        self.name = name or os.path.basename(directory)
        self.spatial = spatial
        self.memory_budget = memory_budget
        self.merge_k = merge_k
        self.faults = faults or NoFaults()
        self.mbr_of = mbr_of
        self.latch = threading.RLock()
        self.memory = SortedDict()  # sort key -> (key, value | ANTIMATTER)
        self.memory_bytes = 0
        self.memory_min_lsn = 0
        self.memory_max_lsn = 0
        self.disk: list[DiskComponent] = []  # newest first
        self.next_seq = 1
        self.closed = False
        self.flush_count = 0
        self.merge_count = 0

    # ---- lifecycle

    def open(self) -> OpenReport:
        """Load valid components; delete invalid ones and ones made redundant
        by a completed merge."""
        os.makedirs(self.directory, exist_ok=True)
        found = []
        for fn in os.listdir(self.directory):
            r = parse_name(fn)
            if r is not None:
                found.append(r)
        invalid = [r for r in found if not is_valid(self.directory, *r)]
        for lo, hi in invalid:
            remove_component(self.directory, lo, hi)
        valid = [r for r in found if r not in invalid]
        covered = [r for r in valid
                   if any(o != r and o[0] <= r[0] and r[1] <= o[1] for o in valid)]
        for lo, hi in covered:
            remove_component(self.directory, lo, hi)
        # stray markers whose data file is gone
        for fn in os.listdir(self.directory):
            if fn.endswith(".valid") and not os.path.exists(os.path.join(self.directory, fn[:-6] + ".dat")):
                os.remove(os.path.join(self.directory, fn))
        live = sorted((r for r in valid if r not in covered), key=lambda r: r[1], reverse=True)
        self.disk = [DiskComponent.load(self.directory, lo, hi) for lo, hi in live]
        self.next_seq = max((hi for _, hi in found), default=0) + 1
        return OpenReport([c.name for c in self.disk], invalid, covered)

    def close(self) -> None:
        self.closed = True

    def _check_open(self) -> None:
        if self.closed:
            raise IndexClosed(f"index {self.name} is closed")

    @property
    def max_lsn(self) -> int:
        """Replay watermark: the newest LSN already persisted in a valid component."""
        return max((c.max_lsn for c in self.disk), default=0)

    # ---- writes

    def _put(self, key: tuple, value, lsn: int, size: int | None) -> None:
        self._check_open()
        sk = key_of(key)
        if size is None:
            size = len(encode(list(key))) + (0 if value is ANTIMATTER else len(encode(value)))
        with self.latch:
            if not self.memory:
                self.memory_min_lsn = lsn
            self.memory[sk] = (key, value)
            self.memory_bytes += size + ENTRY_OVERHEAD
            self.memory_max_lsn = max(self.memory_max_lsn, lsn)

    def insert(self, key: tuple, value, lsn: int = 0, size: int | None = None) -> None:
        self._put(tuple(key), value, lsn, size)

    def delete(self, key: tuple, lsn: int = 0) -> None:
        self._put(tuple(key), ANTIMATTER, lsn, None)

    def needs_flush(self) -> bool:
        return self.memory_bytes > self.memory_budget

    def maybe_flush(self) -> bool:
        with self.latch:
            if self.needs_flush():
                self.flush()
                return True
        return False

    def flush(self):
        """Persist the memory component as a new disk component."""
        self._check_open()
        with self.latch:
            if not self.memory:
                return None
            entries = list(self.memory.values())
            seq = self.next_seq
            write_component(self.directory, seq, seq, entries, self.memory_min_lsn, self.memory_max_lsn)
            self.faults.hit(FLUSH_BEFORE_VALID)
            mark_valid(self.directory, seq, seq)
            self.faults.hit(FLUSH_AFTER_VALID)
            comp = DiskComponent.from_entries(self.directory, seq, seq, entries, self.memory_min_lsn,
                                              self.memory_max_lsn)
            self.next_seq = seq + 1
            self.disk.insert(0, comp)
            self.memory = SortedDict()
            self.memory_bytes = 0
            self.memory_min_lsn = self.memory_max_lsn = 0
            self.flush_count += 1
            if len(self.disk) > self.merge_k:
                self.merge()
            return comp

    def merge(self):
        """Merge every disk component into one (constant-count policy).

        All components take part, so no older component can hold a key an
        antimatter entry refers to: antimatter and what it cancels are dropped.
        """
        self._check_open()
        with self.latch:
            if len(self.disk) < 2:
                return None
            olds = list(self.disk)
            lo, hi = min(c.lo for c in olds), max(c.hi for c in olds)
            entries = list(_resolve([c.range(None, None) for c in olds]))
            min_lsn = min(c.min_lsn for c in olds)
            max_lsn = max(c.max_lsn for c in olds)
            write_component(self.directory, lo, hi, entries, min_lsn, max_lsn)
            self.faults.hit(MERGE_BEFORE_VALID)
            mark_valid(self.directory, lo, hi)
            self.faults.hit(MERGE_AFTER_VALID)
            comp = DiskComponent.from_entries(self.directory, lo, hi, entries, min_lsn, max_lsn)
            self.disk = [comp]
            for c in olds:
                remove_component(self.directory, c.lo, c.hi)
            self.merge_count += 1
            return comp

    def bulk_load(self, entries, lsn: int = 0):
        """Write pre-sorted ``(key, value)`` pairs as one new component."""
        self._check_open()
        entries = [(tuple(k), v) for k, v in entries]
        prev = None
        for k, _ in entries:
            sk = key_of(k)
            if prev is not None and not prev < sk:
                raise UnsortedInput(f"bulk load input not strictly sorted at key {list(k)!r}")
            prev = sk
        if not entries:
            return None
        with self.latch:
            seq = self.next_seq
            write_component(self.directory, seq, seq, entries, lsn, lsn)
            self.faults.hit(FLUSH_BEFORE_VALID)
            mark_valid(self.directory, seq, seq)
            comp = DiskComponent.from_entries(self.directory, seq, seq, entries, lsn, lsn)
            self.next_seq = seq + 1
            self.disk.insert(0, comp)
            if len(self.disk) > self.merge_k:
                self.merge()
            return comp

    # ---- reads

    def _snapshot(self, a, b):
        with self.latch:
            self._check_open()
            if a is None and b is None:
                mem = [(sk, kv[0], kv[1]) for sk, kv in self.memory.items()]
            else:
                keys = self.memory.irange(a, b, inclusive=(True, False)) if b is not None else \
                    self.memory.irange(minimum=a)
                mem = [(sk, *self.memory[sk]) for sk in keys]
            return mem, list(self.disk)

    def get(self, key: tuple):
        """Newest value for ``key`` or ``None`` if absent/deleted."""
        found, value = self.lookup(key)
        return value if found else None

    def lookup(self, key: tuple):
        sk = key_of(tuple(key))
        with self.latch:
            self._check_open()
            hit = self.memory.get(sk)
            disk = list(self.disk)
        if hit is not None:
            return (False, None) if hit[1] is ANTIMATTER else (True, hit[1])
        for c in disk:
            v = c.get(sk)
            if v is not ABSENT:
                return (False, None) if v is ANTIMATTER else (True, v)
        return False, None

    def search(self, lo=None, hi=None, lo_inclusive=True, hi_inclusive=True):
        """Live entries within prefix bounds, in key order."""
        a, b = bounds(lo, hi, lo_inclusive, hi_inclusive)
        mem, disk = self._snapshot(a, b)
        return _resolve([iter(mem)] + [c.range(a, b) for c in disk])

    def scan(self):
        return self.search()

    def spatial_search(self, box):
        """Live entries whose leading key component's MBR intersects ``box``."""
        if self.mbr_of is None:
            raise TypeError(f"index {self.name} is not spatial")
        mem, disk = self._snapshot(None, None)
        box = tuple(box)

        def hits_mem():
            for sk, key, value in mem:
                m = self.mbr_of(key[0])
                if m is not None and m[0] <= box[2] and box[0] <= m[2] and m[1] <= box[3] and box[1] <= m[3]:
                    yield sk, key, value

        streams = [hits_mem()] + [sorted(c.spatial(box, self.mbr_of), key=lambda t: t[0]) for c in disk]
        return _resolve(streams)

    # ---- introspection

    def component_count(self) -> int:
        return len(self.disk)

    def entry_count(self) -> int:
        """Physical entries (including antimatter) over all components."""
        with self.latch:
            return len(self.memory) + sum(len(c) for c in self.disk)
