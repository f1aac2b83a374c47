import os
import random
import shutil
import tempfile

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, initialize, invariant, rule

from tinybdms.adm.values import Point
from tinybdms.errors import IndexClosed, SimulatedCrash
from tinybdms.faults import FaultInjector
from tinybdms.storage.component import component_name, is_valid, parse_name
from tinybdms.storage.dataset import hash_partition
from tinybdms.storage.lsm import LsmIndex
from tinybdms.storage.rtree import RTree, intersects

KEYS = st.integers(0, 40)


class LsmAgainstDict(RuleBasedStateMachine):
    """Random writes, flushes, merges and reopen cycles keep the index equal to a dict."""

    @initialize()
    def setup(self):
        self.dir = tempfile.mkdtemp()
        self.idx = self._open()
        self.shadow = {}
        self.lsn = 0

    def _open(self):
        idx = LsmIndex(self.dir, memory_budget=600, merge_k=3)
        idx.open()
        return idx

    def teardown(self):
        shutil.rmtree(self.dir, ignore_errors=True)

    @rule(k=KEYS, v=st.integers(-(2 ** 31), 2 ** 31 - 1))
    def insert(self, k, v):
        self.lsn += 1
        self.idx.insert((k,), {"v": v}, self.lsn)
        self.shadow[k] = {"v": v}
        self.idx.maybe_flush()

    @rule(k=KEYS)
    def delete(self, k):
        self.lsn += 1
        self.idx.delete((k,), self.lsn)
        self.shadow.pop(k, None)

    @rule()
    def flush(self):
        self.idx.flush()

    @rule()
    def merge(self):
        self.idx.merge()

    @rule()
    def reopen(self):
        self.idx.flush()
        self.idx.close()
        self.idx = self._open()

    @rule(lo=KEYS, hi=KEYS)
    def range_search(self, lo, hi):
        got = [k[0] for k, _ in self.idx.search((lo,), (hi,))]
        assert got == sorted(k for k in self.shadow if lo <= k <= hi)

    @rule(k=KEYS)
    def point_lookup(self, k):
        assert self.idx.get((k,)) == self.shadow.get(k)

    @invariant()
    def scan_matches(self):
        if hasattr(self, "idx"):
            assert [(k[0], v) for k, v in self.idx.scan()] == sorted(self.shadow.items())

    @invariant()
    def merge_bound(self):
        if hasattr(self, "idx"):
            assert self.idx.component_count() <= self.idx.merge_k


TestLsmAgainstDict = LsmAgainstDict.TestCase
TestLsmAgainstDict.settings = settings(max_examples=40, stateful_step_count=60, deadline=None)


def test_exclusive_bounds(tmp_path):
    idx = LsmIndex(str(tmp_path))
    idx.open()
    for k in range(10):
        idx.insert((k,), k)
    assert [k[0] for k, _ in idx.search((2,), (5,), lo_inclusive=False, hi_inclusive=False)] == [3, 4]
    assert [k[0] for k, _ in idx.search(None, (1,))] == [0, 1]


def test_prefix_bounds_on_composite_keys(tmp_path):
    idx = LsmIndex(str(tmp_path))
    idx.open()
    for v in range(5):
        for pk in range(3):
            idx.insert((v, pk), None)
    got = [k for k, _ in idx.search((1,), (2,))]
    assert got == [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]


def test_merge_drops_antimatter_and_shadowed_versions(tmp_path):
    idx = LsmIndex(str(tmp_path), merge_k=100)
    idx.open()
    for k in range(20):
        idx.insert((k,), "old")
    idx.flush()
    for k in range(10):
        idx.delete((k,))
    idx.flush()
    assert idx.entry_count() == 30
    idx.merge()
    assert idx.component_count() == 1 and idx.entry_count() == 10


def test_closed_index_refuses_access(tmp_path):
    idx = LsmIndex(str(tmp_path))
    idx.open()
    idx.close()
    with pytest.raises(IndexClosed):
        idx.insert((1,), 1)


@pytest.mark.parametrize("point", ["flush.before_valid", "merge.before_valid"])
def test_open_discards_components_without_marker(tmp_path, point):
    faults = FaultInjector()
    idx = LsmIndex(str(tmp_path), merge_k=100, faults=faults)
    idx.open()
    idx.insert((1,), "a", 1)
    idx.flush()
    idx.insert((2,), "b", 2)
    if point == "merge.before_valid":
        idx.flush()
        faults.arm(point)
        with pytest.raises(SimulatedCrash):
            idx.merge()
    else:
        faults.arm(point)
        with pytest.raises(SimulatedCrash):
            idx.flush()
    names = [parse_name(f) for f in os.listdir(tmp_path) if parse_name(f)]
    assert any(not is_valid(str(tmp_path), *r) for r in names)

    again = LsmIndex(str(tmp_path))
    report = again.open()
    assert report.removed_invalid
    expected = [(1,), (2,)] if point == "merge.before_valid" else [(1,)]
    assert [k for k, _ in again.scan()] == expected
    assert all(is_valid(str(tmp_path), *parse_name(f)) for f in os.listdir(tmp_path) if parse_name(f))


def test_open_removes_components_covered_by_a_finished_merge(tmp_path):
    faults = FaultInjector()
    idx = LsmIndex(str(tmp_path), merge_k=100, faults=faults)
    idx.open()
    for lsn in (1, 2):
        idx.insert((lsn,), lsn, lsn)
        idx.flush()
    faults.arm("merge.after_valid")
    with pytest.raises(SimulatedCrash):
        idx.merge()
    again = LsmIndex(str(tmp_path))
    report = again.open()
    assert len(report.removed_covered) == 2
    assert again.component_count() == 1
    assert [k for k, _ in again.scan()] == [(1,), (2,)]
    assert again.max_lsn == 2


def test_component_names_roundtrip():
    assert parse_name(component_name(3, 17) + ".dat") == (3, 17)
    assert parse_name(component_name(3, 17) + ".valid") is None


def test_spatial_search_matches_brute_force(tmp_path):
    from tinybdms.storage.dataset import _spatial_mbr

    rng = random.Random(3)
    idx = LsmIndex(str(tmp_path), spatial=True, mbr_of=_spatial_mbr, memory_budget=2000)
    idx.open()
    pts = {i: Point(rng.uniform(0, 100), rng.uniform(0, 100)) for i in range(300)}
    for i, p in pts.items():
        idx.insert((p, i), None)
        idx.maybe_flush()
    for i in range(0, 300, 7):
        idx.delete((pts[i], i))
    live = {i: p for i, p in pts.items() if i % 7}
    for _ in range(20):
        x, y = rng.uniform(0, 90), rng.uniform(0, 90)
        box = (x, y, x + 15, y + 15)
        got = sorted(k[1] for k, _ in idx.spatial_search(box))
        assert got == sorted(i for i, p in live.items() if x <= p.x <= x + 15 and y <= p.y <= y + 15)


@settings(deadline=None)
@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50), st.floats(0, 5), st.floats(0, 5)), max_size=120),
       st.tuples(st.floats(0, 50), st.floats(0, 50), st.floats(0, 20), st.floats(0, 20)))
def test_rtree_search_matches_brute_force(boxes, query):
    tree = RTree(max_entries=6, min_entries=2)
    rects = [(x, y, x + w, y + h) for x, y, w, h in boxes]
    for i, r in enumerate(rects):
        tree.insert(r, i)
    q = (query[0], query[1], query[0] + query[2], query[1] + query[3])
    assert sorted(tree.search(q)) == sorted(i for i, r in enumerate(rects) if intersects(r, q))
    assert len(tree) == len(rects)


@given(st.tuples(st.integers(-(2 ** 40), 2 ** 40)), st.integers(1, 16))
def test_hash_partition_in_range_and_stable(pk, n):
    p = hash_partition(pk, n)
    assert 0 <= p < n
    assert hash_partition(pk, n) == p


def test_hash_partition_spreads_keys():
    counts = [0] * 4
    for k in range(4000):
        counts[hash_partition((k,), 4)] += 1
    assert min(counts) > 800
