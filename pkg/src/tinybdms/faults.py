"""Named crash points for fault-injection testing.

Code paths that matter for durability call ``faults.hit(name)``. When a point
is armed, the hit raises :class:`SimulatedCrash`, which unwinds through every
``except Exception`` handler; the test then drops the instance without
closing it and reopens the data directory, exactly as after a process kill.
"""

from __future__ import annotations

import threading

from .errors import SimulatedCrash

LOG_BEFORE_FORCE = "log.before_force"
LOG_AFTER_FORCE = "log.after_force"
FLUSH_BEFORE_VALID = "flush.before_valid"
FLUSH_AFTER_VALID = "flush.after_valid"
MERGE_BEFORE_VALID = "merge.before_valid"
MERGE_AFTER_VALID = "merge.after_valid"
TXN_AFTER_COMMIT = "txn.after_commit"

POINTS = (LOG_BEFORE_FORCE, LOG_AFTER_FORCE, FLUSH_BEFORE_VALID, FLUSH_AFTER_VALID, MERGE_BEFORE_VALID,
          MERGE_AFTER_VALID, TXN_AFTER_COMMIT)


class FaultInjector:
    def __init__(self):
        self._armed: dict[str, int] = {}
        self._lock = threading.Lock()
        self.crashed: str | None = None
        self.hits: dict[str, int] = {}

    def arm(self, point: str, skip: int = 0) -> None:
        """Crash on the ``skip + 1``-th hit of ``point``."""
        if point not in POINTS:
            raise ValueError(f"unknown fault point {point!r}")
        with self._lock:
            self._armed[point] = skip

    def disarm(self) -> None:
        with self._lock:
            self._armed.clear()

    def hit(self, point: str) -> None:
        with self._lock:
            self.hits[point] = self.hits.get(point, 0) + 1
            if self.crashed is not None:
                # once crashed, the "process" is dead: nothing may proceed
                raise SimulatedCrash(self.crashed)
            if point not in self._armed:
                return
            if self._armed[point] > 0:
                self._armed[point] -= 1
                return
            del self._armed[point]
            self.crashed = point
        raise SimulatedCrash(point)


class NoFaults:
    crashed = None

    def hit(self, point: str) -> None:
        pass
