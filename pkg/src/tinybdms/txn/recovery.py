"""Log replay after a restart.

Disk components without a validity marker (or made redundant by a finished
merge) are removed when an index is opened. Replay then reads each partition
log once and re-applies the update records of committed transactions whose
LSN is newer than the replay watermark of their index, i.e. the largest LSN
recorded in that index's valid components. Records of transactions without a
commit record are ignored: under no-steal they never reached a component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .log import LogManager


@dataclass
class ReplaySummary:
    log: str
    records: int = 0
    committed_txns: int = 0
    uncommitted_txns: int = 0
    replayed: int = 0
    already_persisted: int = 0
    ignored_uncommitted: int = 0
    unknown_target: int = 0
    truncated_bytes: int = 0
    touched: set = field(default_factory=set)

    def describe(self) -> str:
        return (f"{self.log}: {self.records} records, {self.committed_txns} committed txns, "
                f"replayed {self.replayed}, skipped {self.already_persisted} persisted, "
                f"ignored {self.ignored_uncommitted} uncommitted, {self.unknown_target} for dropped objects, "
                f"truncated {self.truncated_bytes} bytes")


def replay(name: str, log: LogManager, resolve_index) -> ReplaySummary:
    """``resolve_index(dataset_id, index_name)`` returns the target
    :class:`LsmIndex` or ``None`` if that dataset/index no longer exists."""
    s = ReplaySummary(name, truncated_bytes=log.truncated_bytes)
    recs = list(log.records())
    s.records = len(recs)
    committed = {r.txn for r in recs if r.kind == "commit"}
    started = {r.txn for r in recs if r.kind == "update"}
    s.committed_txns = len(committed)
    s.uncommitted_txns = len(started - committed)
    for r in recs:
        if r.kind != "update":
            continue
        if r.txn not in committed:
            s.ignored_uncommitted += 1
            continue
        idx = resolve_index(r.ds, r.ix)
        if idx is None:
            s.unknown_target += 1
            continue
        if r.lsn <= idx.max_lsn:
            s.already_persisted += 1
            continue
        if r.op == "insert":
            idx.insert(r.key, r.value, r.lsn)
        else:
            idx.delete(r.key, r.lsn)
        s.replayed += 1
        s.touched.add(idx)
        idx.maybe_flush()
    return s
