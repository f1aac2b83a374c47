import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tinybdms.errors import JobFailed
from tinybdms.runtime.executor import execute
from tinybdms.runtime.job import (ActivityGraph, ConnectorDescriptor, JobSpec, OperatorDescriptor,
                                  compute_stages, expand_activities)
from tinybdms.runtime.join import HybridHashTable, join_key
from tinybdms.runtime.operators import Instance, TaskContext
from tinybdms.runtime.sort import ExternalSorter
from tinybdms.storage.dataset import hash_partition


# ------------------------------------------------------------- sort / join

@settings(max_examples=30, deadline=None)
@given(items=st.lists(st.tuples(st.integers(0, 50), st.text(max_size=8)), max_size=400),
       budget=st.integers(64, 2048))
def test_external_sort_is_stable_and_equals_sorted(tmp_path_factory, items, budget):
    s = ExternalSorter(lambda t: t["k"], budget=budget, temp_dir=str(tmp_path_factory.getbasetemp()))
    tuples = [{"k": k, "s": x} for k, x in items]
    for t in tuples:
        s.add(t)
    assert list(s.sorted()) == sorted(tuples, key=lambda t: t["k"])


def _hash_join(build, probe, budget, tmp):
    table = HybridHashTable(budget=budget, fanout=4, temp_dir=tmp)
    for b in build:
        table.add(join_key([b["k"]]), b)
    out = []
    for p in probe:
        out.extend((p["id"], m["id"]) for m in table.probe(join_key([p["k"]]), p))
    out.extend((p["id"], m["id"]) for p, m in table.finish())
    table.discard()
    return sorted(out), table.spilled


@pytest.mark.parametrize("budget", [1 << 30, 2000])
def test_hybrid_hash_join_matches_nested_loops(budget, tmp_path):
    rng = random.Random(budget)
    build = [{"id": i, "k": rng.choice([None, *range(60)])} for i in range(500)]
    probe = [{"id": i, "k": rng.choice([None, *range(80)])} for i in range(700)]
    got, spilled = _hash_join(build, probe, budget, str(tmp_path))
    assert spilled == (budget < 1 << 30)
    expected = sorted((p["id"], b["id"]) for p in probe for b in build
                      if p["k"] is not None and p["k"] == b["k"])
    assert got == expected


def test_join_key_null_never_matches():
    assert join_key([None]) is None
    assert join_key([1]) == join_key([1.0])


# ------------------------------------------------------------- stages

def _op(i, activities=("main",), blocking=(), input_activity=None, output="main"):
    return OperatorDescriptor(i, "Op", f"op{i}", 1, None, activities, blocking, input_activity or {}, output)


def test_hash_join_job_has_two_stages():
    job = JobSpec()
    for i in (1, 2, 4):
        job.add_operator(_op(i))
    job.add_operator(_op(3, ("build", "probe"), (("build", "probe"),), {0: "build", 1: "probe"}, "probe"))
    job.connect("OneToOne", 1, 3, 0)
    job.connect("OneToOne", 2, 3, 1)
    job.connect("OneToOne", 3, 4)
    stages = compute_stages(expand_activities(job))
    assert stages == [[(1, "main"), (3, "build")], [(2, "main"), (3, "probe"), (4, "main")]]


def test_pipeline_has_one_stage():
    job = JobSpec()
    for i in (1, 2, 3):
        job.add_operator(_op(i))
    job.connect("OneToOne", 1, 2)
    job.connect("OneToOne", 2, 3)
    assert len(compute_stages(expand_activities(job))) == 1


def test_sort_then_join_chains_stages():
    # scan -> sort(rungen|merge) -> join.build ; scan -> join.probe -> sink
    g = ActivityGraph(
        nodes=[(1, "main"), (2, "rungen"), (2, "merge"), (3, "build"), (3, "probe"), (4, "main"), (5, "main")],
        data_edges=[((1, "main"), (2, "rungen")), ((2, "merge"), (3, "build")), ((4, "main"), (3, "probe")),
                    ((3, "probe"), (5, "main"))],
        blocking_edges=[((2, "rungen"), (2, "merge")), ((3, "build"), (3, "probe"))],
    )
    assert len(compute_stages(g)) == 3


def test_blocking_edge_inside_pipeline_is_rejected():
    g = ActivityGraph([(1, "a"), (1, "b")], [((1, "a"), (1, "b"))], [((1, "a"), (1, "b"))])
    with pytest.raises(RuntimeError):
        compute_stages(g)


# ------------------------------------------------------------- executor

class Source(Instance):
    def __init__(self, p, task, n):
        super().__init__(p, task)
        self.n = n

    def run(self, activity, inputs, emit):
        for i in range(self.n):
            emit({"p": self.p, "i": i, "k": (self.p * 7919 + i) % 97})


class Collect(Instance):
    def run(self, activity, inputs, emit):
        self.task.results.setdefault(self.p, []).extend(inputs[0])


class Boom(Instance):
    def run(self, activity, inputs, emit):
        for t in inputs[0]:
            if t["i"] == 50:
                raise ValueError("boom")


def _task():
    return TaskContext(catalog=None, txn=None, compiler=None)


def _two_op_job(kind, src_parts, dst_parts, sink=Collect, n=200, **conn):
    job = JobSpec()
    job.add_operator(OperatorDescriptor(1, "Source", "source", src_parts, lambda p, t: Source(p, t, n)))
    job.add_operator(OperatorDescriptor(2, "Sink", "sink", dst_parts, lambda p, t: sink(p, t)))
    job.connect(kind, 1, 2, **conn)
    return job


def test_hash_partitioning_routes_by_key():
    task = _task()
    job = _two_op_job("MToNPartitioning", 3, 4, hash_fn=lambda t: (t["k"],))
    run = execute(job, task, frame_size=8, queue_depth=2)
    got = task.results
    assert sum(len(v) for v in got.values()) == 600
    for p, ts in got.items():
        assert all(hash_partition((t["k"],), 4) == p for t in ts)
    assert run.connector_counts[1] == (600, 600)


def test_merging_connector_keeps_order():
    class SortedSource(Source):
        def run(self, activity, inputs, emit):
            for i in sorted(range(self.n), key=lambda i: (i * 31 + self.p) % 101):
                emit({"p": self.p, "i": i, "k": (i * 31 + self.p) % 101})

    task = _task()
    job = JobSpec()
    job.add_operator(OperatorDescriptor(1, "Source", "source", 4, lambda p, t: SortedSource(p, t, 100)))
    job.add_operator(OperatorDescriptor(2, "Sink", "sink", 1, lambda p, t: Collect(p, t)))
    job.connect("MToNPartitioningMerging", 1, 2, hash_fn=lambda t: (), sort_key=lambda t: t["k"])
    execute(job, task, frame_size=4, queue_depth=2)
    ks = [t["k"] for t in task.results[0]]
    assert len(ks) == 400 and ks == sorted(ks)


def test_replicating_connector_copies_to_every_consumer():
    task = _task()
    execute(_two_op_job("MToNReplicating", 2, 3, n=10), task)
    assert [len(task.results[p]) for p in range(3)] == [20, 20, 20]


def test_failure_aborts_job_and_names_operator():
    job = _two_op_job("OneToOne", 2, 2, sink=Boom, n=10_000)
    with pytest.raises(JobFailed) as e:
        execute(job, _task(), frame_size=4, queue_depth=2)
    assert e.value.operator.startswith("op2.main")
    assert isinstance(e.value.__cause__, ValueError)


def test_bounded_queues_apply_back_pressure():
    produced, consumed = [0], [0]
    gate = threading.Event()
    seen = []

    class Fast(Instance):
        def run(self, activity, inputs, emit):
            for i in range(1000):
                produced[0] += 1
                emit({"i": i})

    class Slow(Instance):
        def run(self, activity, inputs, emit):
            for t in inputs[0]:
                if consumed[0] == 0:
                    gate.wait(0.3)  # let the producer run ahead as far as it can
                    seen.append(produced[0])
                consumed[0] += 1

    job = JobSpec()
    job.add_operator(OperatorDescriptor(1, "Fast", "fast", 1, lambda p, t: Fast(p, t)))
    job.add_operator(OperatorDescriptor(2, "Slow", "slow", 1, lambda p, t: Slow(p, t)))
    job.connect("OneToOne", 1, 2)
    execute(job, _task(), frame_size=4, queue_depth=2)
    assert consumed[0] == 1000
    # one frame in the consumer's hands, two queued, one being filled
    assert seen[0] <= 4 * 4 + 1
