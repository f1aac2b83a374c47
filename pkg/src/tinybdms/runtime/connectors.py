"""Connector transport: bounded frame queues between operator instances.

A frame is a list of at most ``frame_size`` tuples. Frames are handed over by
reference; operators never mutate a tuple or frame they received. Every
consumer port owns its queues: one shared queue for plain connectors, one
queue per producer for merging connectors. A producer closes its side by
sending ``EOS`` once to every queue it feeds.
"""

from __future__ import annotations

import heapq
import queue
import threading

from ..storage.dataset import hash_partition

EOS = object()
POLL = 0.05


class JobAborted(Exception):
    """Raised inside worker threads once the job has failed elsewhere."""


class Channel:
    def __init__(self, depth: int, abort: threading.Event):
        self.q = queue.Queue(maxsize=depth)
        self.abort = abort

    def put(self, item) -> None:
        while True:
            try:
                self.q.put(item, timeout=POLL)
                return
            except queue.Full:
                if self.abort.is_set():
                    raise JobAborted() from None

    def get(self):
        while True:
            try:
                return self.q.get(timeout=POLL)
            except queue.Empty:
                if self.abort.is_set():
                    raise JobAborted() from None


class Counter:
    def __init__(self):
        self.n = 0
        self._lock = threading.Lock()

    def add(self, k: int) -> None:
        with self._lock:
            self.n += k


class Inbox:
    """The receiving end of one consumer port on one partition."""

    def __init__(self, producers: int, merging: bool, depth: int, abort: threading.Event, sort_key=None):
        self.producers = producers
        self.merging = merging
        self.sort_key = sort_key
        if merging:
            self.channels = [Channel(depth, abort) for _ in range(producers)]
        else:
            self.channels = [Channel(depth, abort)]

    def channel_for(self, producer: int) -> Channel:
        return self.channels[producer] if self.merging else self.channels[0]

    def reader(self, delivered: Counter, count_in=None):
        if self.merging:
            streams = [_drain(ch, 1, delivered, count_in) for ch in self.channels]
            return heapq.merge(*streams, key=self.sort_key)
        return _drain(self.channels[0], self.producers, delivered, count_in)


def _drain(ch: Channel, producers: int, delivered: Counter, count_in):
    open_ = producers
    while open_:
        frame = ch.get()
        if frame is EOS:
            open_ -= 1
            continue
        delivered.add(len(frame))
        if count_in is not None:
            count_in(len(frame))
        yield from frame


class Writer:
    """The sending end of one producer instance on one connector.

    ``inboxes`` are the consumer ports this producer feeds: exactly one for a
    OneToOne connector (the consumer with the producer's index), all of them
    otherwise.
    """

    def __init__(self, kind: str, producer: int, inboxes: list, frame_size: int, sent: Counter, hash_fn=None):
        self.kind = kind
        self.targets = [ib.channel_for(producer) for ib in inboxes]
        self.frame_size = frame_size
        self.sent = sent
        self.hash_fn = hash_fn
        self.replicate = kind == "MToNReplicating"
        self.route = kind in ("MToNPartitioning", "MToNPartitioningMerging") and len(self.targets) > 1
        self.buffers = [[] for _ in self.targets]
        self.count = 0

    def emit(self, t) -> None:
        self.count += 1
        i = hash_partition(self.hash_fn(t), len(self.targets)) if self.route else 0
        buf = self.buffers[i]
        buf.append(t)
        if len(buf) >= self.frame_size:
            self._send(i)

    def _send(self, i: int) -> None:
        frame = self.buffers[i]
        if not frame:
            return
        self.buffers[i] = []
        if self.replicate:
            for ch in self.targets:
                self.sent.add(len(frame))
                ch.put(frame)
        else:
            self.sent.add(len(frame))
            self.targets[i].put(frame)

    def close(self) -> None:
        for i in range(len(self.buffers)):
            self._send(i)
        for ch in self.targets:
            ch.put(EOS)
