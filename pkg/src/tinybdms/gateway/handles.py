"""Asynchronous result handles with spooled results."""

from __future__ import annotations

import os
import tempfile
import threading
import time
import uuid
from dataclasses import dataclass, field

RUNNING, SUCCESS, FAILED = "running", "success", "failed"


@dataclass
class Handle:
    id: str
    status: str = RUNNING
    created: float = field(default_factory=time.monotonic)
    path: str | None = None  # spool file once successful
    error: dict | None = None

    def describe(self) -> dict:
        out = {"handle": self.id, "status": self.status}
        if self.error is not None:
            out["error"] = self.error
        return out


class HandleTable:
    """Handles live until released or until ``ttl`` seconds after creation."""

    def __init__(self, spool_dir: str, ttl: float = 600.0):
        self.spool_dir = spool_dir
        self.ttl = ttl
        self._handles: dict[str, Handle] = {}
        self._lock = threading.Lock()
        os.makedirs(spool_dir, exist_ok=True)

    def create(self) -> Handle:
        h = Handle(uuid.uuid4().hex)
        with self._lock:
            self._expire()
            self._handles[h.id] = h
        return h

    def get(self, hid: str) -> Handle | None:
        with self._lock:
            self._expire()
            return self._handles.get(hid)

    def succeed(self, h: Handle, text: str) -> None:
        fd, path = tempfile.mkstemp(prefix=f"result-{h.id}-", suffix=".adm", dir=self.spool_dir)
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        h.path = path
        h.status = SUCCESS

    def fail(self, h: Handle, error: dict) -> None:
        h.error = error
        h.status = FAILED

    def read(self, h: Handle) -> str:
        with open(h.path, encoding="utf-8") as f:
            return f.read()

    def release(self, hid: str) -> bool:
        with self._lock:
            h = self._handles.pop(hid, None)
        if h is None:
            return False
        _unlink(h.path)
        return True

    def _expire(self) -> None:
        cutoff = time.monotonic() - self.ttl
        for hid in [k for k, h in self._handles.items() if h.created < cutoff and h.status != RUNNING]:
            _unlink(self._handles.pop(hid).path)

    def clear(self) -> None:
        with self._lock:
            for h in self._handles.values():
                _unlink(h.path)
            self._handles.clear()


def _unlink(path: str | None) -> None:
    if path:
        try:
            os.unlink(path)
        except OSError:
            pass
