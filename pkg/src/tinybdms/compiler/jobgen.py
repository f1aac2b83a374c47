"""Physical plan to runtime job.

Every plan operator except :class:`~.plan.Exchange` becomes one operator
descriptor with the partition count of its output property. An exchange
becomes the connector between its input and its consumer; every other edge is
a OneToOne connector.
"""

from __future__ import annotations

from ..runtime import operators as R
from ..runtime.job import JobSpec, OperatorDescriptor
from . import plan as P

TAXONOMY = {
    "EmptySource": "EmptyTupleSourceOperatorDescriptor",
    "DataScan": "BTreeSearchOperatorDescriptor",
    "ExternalScan": "ExternalDataScanOperatorDescriptor",
    "PrimarySearch": "BTreeSearchOperatorDescriptor",
    "SecondarySearch.btree": "BTreeSearchOperatorDescriptor",
    "SecondarySearch.rtree": "RTreeSearchOperatorDescriptor",
    "SecondarySearch.keyword": "LSMInvertedIndexSearchOperatorDescriptor",
    "PrimaryLookup": "BTreeSearchOperatorDescriptor",
    "Select": "StreamSelectOperatorDescriptor",
    "Select.post": "PostValidationSelectOperatorDescriptor",
    "Assign": "AssignOperatorDescriptor",
    "Unnest": "UnnestOperatorDescriptor",
    "Join.hash": "HybridHashJoinOperatorDescriptor",
    "Join.nested-loop": "NestedLoopJoinOperatorDescriptor",
    "IndexJoin": "IndexNestedLoopJoinOperatorDescriptor",
    "Group": "HashGroupOperatorDescriptor",
    "Aggregate.complete": "AggregateOperatorDescriptor",
    "Aggregate.local": "LocalAggregateOperatorDescriptor",
    "Aggregate.global": "GlobalAggregateOperatorDescriptor",
    "Sort": "ExternalSortOperatorDescriptor",
    "Limit": "StreamLimitOperatorDescriptor",
    "Result": "ResultWriterOperatorDescriptor",
    "InsertSink": "LSMTreeIndexInsertOperatorDescriptor",
    "DeleteSink": "LSMTreeIndexDeleteOperatorDescriptor",
}


def _descriptor(op: P.Op) -> tuple:
    """``(taxonomy name, factory(p, task), activity settings)``."""
    t = type(op).__name__
    one = {}
    if isinstance(op, P.EmptySource):
        return TAXONOMY[t], R.EmptySourceOp, one
    if isinstance(op, P.DataScan):
        name = TAXONOMY["DataScan" if op.dataset.internal else "ExternalScan"]
        return name, lambda p, task: R.ScanOp(p, task, op.var, op.dataset), one
    if isinstance(op, P.PrimarySearch):
        return TAXONOMY[t], lambda p, task: R.PrimarySearchOp(p, task, op), one
    if isinstance(op, P.SecondarySearch):
        return TAXONOMY[f"{t}.{op.index.index_type}"], lambda p, task: R.SecondarySearchOp(p, task, op), one
    if isinstance(op, P.PrimaryLookup):
        return TAXONOMY[t], lambda p, task: R.PrimaryLookupOp(p, task, op), one
    if isinstance(op, P.Select):
        return TAXONOMY["Select.post" if op.post_validation else "Select"], \
            lambda p, task: R.SelectOp(p, task, op.cond), one
    if isinstance(op, P.Assign):
        return TAXONOMY[t], lambda p, task: R.AssignOp(p, task, op.var, op.expr), one
    if isinstance(op, P.Unnest):
        return TAXONOMY[t], lambda p, task: R.UnnestOp(p, task, op.var, op.expr), one
    if isinstance(op, P.Join):
        if op.method == "hash":
            acts = dict(activities=("build", "probe"), blocking=(("build", "probe"),),
                        input_activity={0: "probe", 1: "build"}, output_activity="probe")
            return TAXONOMY["Join.hash"], lambda p, task: R.HashJoinOp(p, task, op), acts
        acts = dict(activities=("materialize", "probe"), blocking=(("materialize", "probe"),),
                    input_activity={0: "probe", 1: "materialize"}, output_activity="probe")
        return TAXONOMY["Join.nested-loop"], lambda p, task: R.NestedLoopJoinOp(p, task, op), acts
    if isinstance(op, P.IndexJoin):
        return TAXONOMY[t], lambda p, task: R.IndexJoinOp(p, task, op), one
    if isinstance(op, P.Group):
        return TAXONOMY[t], lambda p, task: R.GroupOp(p, task, op), one
    if isinstance(op, P.Aggregate):
        return TAXONOMY[f"{t}.{op.phase}"], lambda p, task: R.AggregateOp(p, task, op), one
    if isinstance(op, P.Sort):
        acts = dict(activities=("rungen", "merge"), blocking=(("rungen", "merge"),),
                    input_activity={0: "rungen"}, output_activity="merge")
        if op.purpose == "pk":
            return TAXONOMY[t], lambda p, task: R.SortOp(p, task, R.make_sort_key(task, op)), acts
        return TAXONOMY[t], lambda p, task: R.OrderSortOp(p, task, op), acts
    if isinstance(op, P.Limit):
        return TAXONOMY[t], lambda p, task: R.LimitOp(p, task, op), one
    if isinstance(op, P.Result):
        return TAXONOMY[t], lambda p, task: R.ResultOp(p, task, op.expr), one
    if isinstance(op, P.InsertSink):
        return TAXONOMY[t], lambda p, task: R.InsertOp(p, task, op), one
    if isinstance(op, P.DeleteSink):
        return TAXONOMY[t], lambda p, task: R.DeleteOp(p, task, op), one
    raise TypeError(f"no runtime operator for {t}")


def _hash_fn(task, keys):
    fs = [task.compile(k) for k in keys]
    return lambda t: tuple(f(t) for f in fs)


def generate_job(root: P.Op, task) -> JobSpec:
    """Build the job. ``task`` supplies the expression compiler used for the
    connectors' hash and merge functions."""
    job = JobSpec()
    ids: dict = {}

    def visit(op: P.Op) -> int:
        if id(op) in ids:
            return ids[id(op)]
        name, factory, acts = _descriptor(op)
        oid = len(job.operators) + 1
        ids[id(op)] = oid
        job.add_operator(OperatorDescriptor(oid, name, op.label(), op.prop.n if op.prop else 1, factory, **acts))
        for port, child in enumerate(op.inputs):
            if isinstance(child, P.Exchange):
                src = visit(child.inputs[0])
                kw = dict(label=child.label())
                if child.kind == "MToNPartitioning" and child.keys:
                    kw["hash_fn"] = _hash_fn(task, child.keys)
                if child.kind == "MToNPartitioningMerging":
                    kw["sort_key"] = R.make_sort_key(task, P.Sort(child.sort_keys))
                job.connect(child.kind, src, oid, port, **kw)
            else:
                job.connect("OneToOne", visit(child), oid, port)
        return oid

    job.root = visit(root)
    return job

