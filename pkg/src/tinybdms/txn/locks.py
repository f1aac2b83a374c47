"""Node-local lock table on primary keys.

A record-level transaction touches exactly one primary key, so two-phase
locking reduces to acquire-on-entry / release-on-exit and no deadlock can
form. Readers validating a secondary-index hit take the same lock for the
duration of one primary lookup.
"""

from __future__ import annotations

import threading
from collections import deque

from ..adm.binary import encode_key_tuple


class LockTable:
    def __init__(self):
        self._cond = threading.Condition()
        self._holders: dict[bytes, int] = {}
        self._waiters: dict[bytes, deque] = {}
        self.waits = 0

    @staticmethod
    def _k(dataset_id: int, pk: tuple) -> bytes:
        return dataset_id.to_bytes(8, "little") + encode_key_tuple(pk)

    def acquire(self, dataset_id: int, pk: tuple, txn: int) -> None:
        k = self._k(dataset_id, pk)
        with self._cond:
            if self._holders.get(k, txn) == txn and not self._waiters.get(k):
                self._holders[k] = txn
                return
            q = self._waiters.setdefault(k, deque())
            q.append(txn)
            self.waits += 1
            # FIFO hand-off keeps waiting writers from starving
            while not (k not in self._holders and q[0] == txn):
                self._cond.wait()
            q.popleft()
            if not q:
                del self._waiters[k]
            self._holders[k] = txn

    def release(self, dataset_id: int, pk: tuple, txn: int) -> None:
        k = self._k(dataset_id, pk)
        with self._cond:
            if self._holders.get(k) != txn:
                raise RuntimeError(f"txn {txn} does not hold the lock it releases")
            del self._holders[k]
            self._cond.notify_all()

    def held(self) -> int:
        with self._cond:
            return len(self._holders)
