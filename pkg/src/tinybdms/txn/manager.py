"""Record-level transactions.

Each insert or delete of one record is its own transaction:

1. lock the primary key (partition-local lock table),
2. log one update record per affected index entry, primary and secondaries,
   then a commit record, and force the log,
3. apply the entries to the in-memory components,
4. release the lock.

Nothing reaches an in-memory component before its commit record is durable,
so disk components never hold uncommitted data (no-steal) and recovery has
nothing to undo. Writers on one partition are serialized by a partition latch
held from the first log append to the last apply, which keeps the apply order
equal to LSN order; a flush can therefore use the newest applied LSN as its
replay watermark.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field

from ..errors import DuplicateKey, StorageError
from ..storage.dataset import PRIMARY, DatasetStore
from ..faults import TXN_AFTER_COMMIT, NoFaults
from .locks import LockTable
from .log import LogManager, LogRecord


@dataclass
class PartitionLog:
    name: str
    log: LogManager
    latch: threading.RLock = field(default_factory=threading.RLock)
    locks: LockTable = field(default_factory=LockTable)


class TransactionManager:
    def __init__(self, log_dir: str, faults=None, fsync: bool = True):
        self.log_dir = log_dir
        self.faults = faults or NoFaults()
        self.fsync = fsync
        self._logs: dict[str, PartitionLog] = {}
        self._lock = threading.Lock()
        self._next_txn = 1
        self._txn_lock = threading.Lock()
        self.committed = 0

    def partition(self, name: str) -> PartitionLog:
        with self._lock:
            pl = self._logs.get(name)
            if pl is None:
                log = LogManager(os.path.join(self.log_dir, f"{name}.wal"), self.faults, self.fsync)
                # keep transaction ids unique across restarts of the same log
                top = max((r.txn for r in log.records()), default=0)
                with self._txn_lock:
                    self._next_txn = max(self._next_txn, top + 1)
                pl = PartitionLog(name, log)
                self._logs[name] = pl
            return pl

    def _new_txn(self) -> int:
        with self._txn_lock:
            n = self._next_txn
            self._next_txn += 1
            return n

    def logs(self):
        return dict(self._logs)

    def close(self) -> None:
        for pl in self._logs.values():
            pl.log.close()

    # ---- writes

    def _run(self, store: DatasetStore, p: int, pl: PartitionLog, txn: int, ops) -> None:
        part = store.partitions[p]
        recs = [LogRecord(0, txn, "update", store.dataset_id, ix, op, key, value) for ix, op, key, value in ops]
        for r in recs:
            pl.log.append(r)
        pl.log.append(LogRecord(0, txn, "commit"))
        pl.log.force()
        for r in recs:
            idx = part.index(r.ix)
            if r.op == "insert":
                idx.insert(r.key, r.value, r.lsn)
            else:
                idx.delete(r.key, r.lsn)
        self.committed += 1
        self.faults.hit(TXN_AFTER_COMMIT)
        for _, idx in part.indexes():
            idx.maybe_flush()

    def insert(self, store: DatasetStore, record: dict) -> None:
        pk = store.pk_of(record)
        if any(v is None for v in pk):
            raise StorageError(f"record has no primary key value for {store.qualified_name}")
        p = store.partition_of(pk)
        pl = self.partition(store.log_partition(p))
        txn = self._new_txn()
        pl.locks.acquire(store.dataset_id, pk, txn)
        try:
            with pl.latch:
                part = store.partitions[p]
                if part.primary.lookup(pk)[0]:
                    raise DuplicateKey(f"duplicate primary key {list(pk)!r} in {store.qualified_name}")
                ops = [(PRIMARY, "insert", pk, record)]
                for name, (spec, _idx) in part.secondaries.items():
                    ops.extend((name, "insert", k, None) for k in spec.keys_for(record, pk))
                self._run(store, p, pl, txn, ops)
        finally:
            pl.locks.release(store.dataset_id, pk, txn)

    def delete(self, store: DatasetStore, pk: tuple) -> bool:
        pk = tuple(pk)
        p = store.partition_of(pk)
        pl = self.partition(store.log_partition(p))
        txn = self._new_txn()
        pl.locks.acquire(store.dataset_id, pk, txn)
        try:
            with pl.latch:
                part = store.partitions[p]
                found, old = part.primary.lookup(pk)
                if not found:
                    return False
                ops = [(PRIMARY, "delete", pk, None)]
                for name, (spec, _idx) in part.secondaries.items():
                    ops.extend((name, "delete", k, None) for k in spec.keys_for(old, pk))
                self._run(store, p, pl, txn, ops)
                return True
        finally:
            pl.locks.release(store.dataset_id, pk, txn)

    def apply_batch(self, ops) -> None:
        """Apply several record operations as one transaction.

        ``ops`` is a list of ``(store, "insert" | "delete", record_or_pk)``; all
        stores must be served by the same log (the catalog's metadata datasets
        are). Used to make multi-record catalog changes atomic.
        """
        if not ops:
            return
        first = ops[0][0]
        names = set()
        keyed = []
        for store, op, arg in ops:
            pk = store.pk_of(arg) if op == "insert" else tuple(arg)
            p = store.partition_of(pk)
            names.add(store.log_partition(p))
            keyed.append((store, op, arg, pk, p))
        if len(names) != 1:
            raise StorageError("a batch transaction must stay within one log")
        pl = self.partition(first.log_partition(keyed[0][4]))
        txn = self._new_txn()
        locked = []
        try:
            for store, _op, _arg, pk, _p in sorted(keyed, key=lambda k: (k[0].dataset_id, repr(k[3]))):
                if (store.dataset_id, pk) not in locked:
                    pl.locks.acquire(store.dataset_id, pk, txn)
                    locked.append((store.dataset_id, pk))
            with pl.latch:
                recs = []
                seen: dict = {}  # effects of earlier operations in this batch
                for store, op, arg, pk, p in keyed:
                    part = store.partitions[p]
                    found, old = seen.get((store.dataset_id, pk)) or part.primary.lookup(pk)
                    seen[(store.dataset_id, pk)] = (True, arg) if op == "insert" else (False, None)
                    if op == "insert":
                        if found:
                            raise DuplicateKey(f"duplicate primary key {list(pk)!r} in {store.qualified_name}")
                        recs.append((store, p, PRIMARY, "insert", pk, arg))
                        for name, (spec, _idx) in part.secondaries.items():
                            recs.extend((store, p, name, "insert", k, None) for k in spec.keys_for(arg, pk))
                    elif found:
                        recs.append((store, p, PRIMARY, "delete", pk, None))
                        for name, (spec, _idx) in part.secondaries.items():
                            recs.extend((store, p, name, "delete", k, None) for k in spec.keys_for(old, pk))
                logged = []
                for store, p, ix, op, key, value in recs:
                    r = LogRecord(0, txn, "update", store.dataset_id, ix, op, key, value)
                    pl.log.append(r)
                    logged.append((store.partitions[p].index(ix), r))
                pl.log.append(LogRecord(0, txn, "commit"))
                pl.log.force()
                for idx, r in logged:
                    if r.op == "insert":
                        idx.insert(r.key, r.value, r.lsn)
                    else:
                        idx.delete(r.key, r.lsn)
                self.committed += 1
                self.faults.hit(TXN_AFTER_COMMIT)
                for idx, _r in logged:
                    idx.maybe_flush()
        finally:
            for ds, pk in locked:
                pl.locks.release(ds, pk, txn)

    # ---- reads

    def locked_get(self, store: DatasetStore, pk: tuple):
        """Primary lookup under a short-duration lock (secondary-hit validation)."""
        pk = tuple(pk)
        p = store.partition_of(pk)
        pl = self.partition(store.log_partition(p))
        txn = self._new_txn()
        pl.locks.acquire(store.dataset_id, pk, txn)
        try:
            return store.partitions[p].primary.get(pk)
        finally:
            pl.locks.release(store.dataset_id, pk, txn)

    # ---- maintenance

    def current_lsns(self, store: DatasetStore) -> list:
        return [self.partition(store.log_partition(p)).log.last_lsn for p in range(store.n)]

    def exclusive(self, store: DatasetStore):
        """Context manager holding every partition latch of ``store``."""
        return _Exclusive([self.partition(n).latch for n in sorted({store.log_partition(p) for p in range(store.n)})])

    def flush(self, store: DatasetStore) -> None:
        with self.exclusive(store):
            for part in store.partitions:
                for _, idx in part.indexes():
                    idx.flush()


class _Exclusive:
    def __init__(self, latches):
        self.latches = latches

    def __enter__(self):
        for latch in self.latches:
            latch.acquire()
        return self

    def __exit__(self, *exc):
        for latch in reversed(self.latches):
            latch.release()
        return False
