import os
import threading

import pytest

from tinybdms.config import Config
from tinybdms.errors import DuplicateKey, SimulatedCrash
from tinybdms.faults import FaultInjector
from tinybdms.instance import Instance

SCHEMA = """
create dataverse X; use dataverse X;
create type T as open { id: int32, v: int32 }
create dataset D(T) primary key id;
create index vIdx on D(v);
"""


def _open(path, faults=None, **kw):
    kw.setdefault("partitions", 2)
    return Instance(Config(data_dir=str(path), fsync=False, **kw), faults=faults).open()


def _snapshot(inst) -> dict:
    store = inst.catalog.store("X", "D")
    return {(p, name): list(idx.scan()) for p, part in enumerate(store.partitions) for name, idx in part.indexes()}


def _files(root) -> dict:
    out = {}
    for d, _dirs, files in os.walk(os.path.join(root, "storage")):
        for f in files:
            with open(os.path.join(d, f), "rb") as fh:
                out[os.path.relpath(os.path.join(d, f), root)] = fh.read()
    return out


def _insert(inst, s, i, v=None):
    inst.execute(f'insert into dataset D ({{"id": {i}, "v": {i % 7 if v is None else v}}});', s)


def test_concurrent_inserts_of_one_key(make_instance):
    inst = make_instance(partitions=2)
    s = inst.session()
    inst.execute(SCHEMA, s)
    for round_ in range(20):
        outcomes = []
        barrier = threading.Barrier(4)

        def worker(n):
            barrier.wait()
            try:
                _insert(inst, inst.session(dataverse="X"), 1000 + round_, n)
                outcomes.append("ok")
            except DuplicateKey:
                outcomes.append("dup")

        threads = [threading.Thread(target=worker, args=(n,)) for n in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(outcomes) == ["dup", "dup", "dup", "ok"]
    assert all(pl.locks.held() == 0 for pl in inst.txn.logs().values())
    assert inst.query("count(for $d in dataset D return $d);", s) == [20]


def test_one_commit_record_per_insert(make_instance):
    inst = make_instance(partitions=1)
    s = inst.session()
    inst.execute(SCHEMA, s)
    log = inst.txn.partition("0").log
    before = [r.kind for r in log.records()]
    _insert(inst, s, 11)
    after = [r.kind for r in log.records()][len(before):]
    # one update for the primary, one for the secondary, then the commit
    assert after == ["update", "update", "commit"]


def test_commit_then_crash_before_flush_is_recovered(tmp_path):
    inst = _open(tmp_path)
    s = inst.session()
    inst.execute(SCHEMA, s)
    for i in range(50):
        _insert(inst, s, i)
    inst.crash()
    inst = _open(tmp_path)
    try:
        assert inst.query("count(for $d in dataset X.D return $d);") == [50]
        assert sum(r.replayed for r in inst.recovery) >= 100
    finally:
        inst.close()


def test_recovery_twice_gives_identical_state(tmp_path):
    inst = _open(tmp_path, memory_budget=2000, merge_k=2)
    s = inst.session()
    inst.execute(SCHEMA, s)
    for i in range(300):
        _insert(inst, s, i)
        if i % 3 == 0:
            inst.execute(f"delete $d from dataset D where $d.id = {i // 2};", s)
    inst.crash()
    first = _open(tmp_path, memory_budget=2000, merge_k=2)
    state, files = _snapshot(first), _files(tmp_path)
    first.crash()
    second = _open(tmp_path, memory_budget=2000, merge_k=2)
    try:
        assert _snapshot(second) == state
        assert _files(tmp_path) == files
    finally:
        second.close()


def test_recovery_without_new_commits_is_a_no_op(tmp_path):
    inst = _open(tmp_path)
    s = inst.session()
    inst.execute(SCHEMA, s)
    for i in range(20):
        _insert(inst, s, i)
    inst.close()  # clean shutdown flushes
    files = _files(tmp_path)
    again = _open(tmp_path)
    try:
        user = [r for r in again.recovery if r.log != "meta"]
        assert sum(r.replayed for r in user) == 0
        assert _files(tmp_path) == files
    finally:
        again.close()


def test_uncommitted_operation_never_reaches_disk(tmp_path):
    faults = FaultInjector()
    inst = _open(tmp_path, faults=faults)
    s = inst.session()
    inst.execute(SCHEMA, s)
    _insert(inst, s, 1)
    faults.arm("log.before_force")
    with pytest.raises(SimulatedCrash):
        _insert(inst, s, 2)
    inst.crash()
    inst = _open(tmp_path)
    try:
        assert inst.query("for $d in dataset X.D return $d.id;") == [1]
        inst.txn.flush(inst.catalog.store("X", "D"))
        assert [pk for part in inst.catalog.store("X", "D").partitions for pk, _ in part.primary.scan()] == [(1,)]
    finally:
        inst.close()


def test_torn_log_tail_is_truncated(tmp_path):
    inst = _open(tmp_path, partitions=1)
    s = inst.session()
    inst.execute(SCHEMA, s)
    for i in range(5):
        _insert(inst, s, i)
    inst.crash()
    with open(tmp_path / "log" / "0.wal", "ab") as f:
        f.write(b"\x40\x00\x00\x00half a record")
    inst = _open(tmp_path, partitions=1)
    try:
        (user,) = [r for r in inst.recovery if r.log == "0"]
        assert user.truncated_bytes == len(b"\x40\x00\x00\x00half a record")
        assert inst.query("count(for $d in dataset X.D return $d);") == [5]
        _insert(inst, inst.session(dataverse="X"), 99)
    finally:
        inst.close()
    inst = _open(tmp_path, partitions=1)
    try:
        assert inst.query("count(for $d in dataset X.D return $d);") == [6]
    finally:
        inst.close()


def test_dropped_dataset_log_records_are_skipped(tmp_path):
    inst = _open(tmp_path)
    s = inst.session()
    inst.execute(SCHEMA, s)
    for i in range(10):
        _insert(inst, s, i)
    inst.execute("drop dataset D;", s)
    inst.crash()
    inst = _open(tmp_path)
    try:
        assert sum(r.unknown_target for r in inst.recovery) > 0
        assert inst.catalog.dataset("X", "D") is None
    finally:
        inst.close()
