"""Runtime operator instances.

Each instance serves one partition of one operator. ``run(activity, inputs,
emit)`` executes one activity: ``inputs`` maps the activity's input ports to
tuple iterators and ``emit`` sends one tuple downstream (``None`` for sinks
and for activities that produce nothing). Tuples are dicts from variable name
to ADM value; operators build new dicts instead of mutating received ones.
Multi-activity operators keep the state handed from one activity to the next
(hash table, sort runs) on the instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..adm.compare import key_of
from ..adm.types import coerce, conforms
from ..adm.values import Bag, type_name
from ..errors import ConformanceError, TypeMismatch
from ..functions import ops
from ..functions.aggregates import AGGREGATES
from ..functions.spatial import mbr
from ..functions.strings import tokens as word_token_list
from ..compiler.expr import check_order_classes, env_key, group_key, iterate, limit_value, order_key
from .join import HybridHashTable, join_key
from .sort import ExternalSorter

STATE = "#state"


@dataclass
class TaskContext:
    """What operator instances of one job share."""

    catalog: object
    txn: object
    compiler: object  # ExprCompiler bound to the job's EvalContext
    read_external: object = None  # (DatasetDef) -> record iterator
    sort_budget: int = 4 << 20
    join_budget: int = 4 << 20
    temp_dir: str | None = None
    hooks: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)  # partition -> list of values
    mutations: dict = field(default_factory=dict)  # partition -> count

    def store(self, ds):
        return self.catalog.store(ds.dataverse, ds.name)

    def compile(self, e):
        return self.compiler.compile(e) if e is not None else None

    def constant(self, e):
        return self.compiler.compile(e)({}) if e is not None else None


class Instance:
    def __init__(self, p: int, task: TaskContext):
        self.p = p
        self.task = task

    def run(self, activity: str, inputs: dict, emit) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


# ------------------------------------------------------------------ sources

class EmptySourceOp(Instance):
    def run(self, activity, inputs, emit):
        emit({})


class ScanOp(Instance):
    def __init__(self, p, task, var, ds):
        super().__init__(p, task)
        self.var, self.ds = var, ds

    def run(self, activity, inputs, emit):
        var = self.var
        if self.ds.internal:
            for rec in self.task.store(self.ds).scan_partition(self.p):
                emit({var: rec})
        else:
            for rec in self.task.read_external(self.ds):
                emit({var: rec})


class PrimarySearchOp(Instance):
    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.op = op

    def run(self, activity, inputs, emit):
        op, t = self.op, self.task
        lo, hi = t.constant(op.lo), t.constant(op.hi)
        if (op.lo is not None and lo is None) or (op.hi is not None and hi is None):
            return  # comparison with null never holds
        idx = t.store(op.dataset).partitions[self.p].primary
        for _key, rec in idx.search((lo,) if op.lo is not None else None, (hi,) if op.hi is not None else None,
                                    op.lo_inclusive, op.hi_inclusive):
            emit({op.var: rec})


class SecondarySearchOp(Instance):
    """Emits the primary keys of the index hits (a candidate superset; the
    plan re-checks the predicate after the primary lookup)."""

    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.op = op

    def run(self, activity, inputs, emit):
        op = self.op
        store = self.task.store(op.dataset)
        part = store.partitions[self.p]
        idx = part.index(op.index.name)
        kind = op.index.index_type
        if kind == "btree":
            pks = self._btree(idx, len(op.index.fields))
        elif kind == "rtree":
            pks = self._rtree(idx)
        else:
            pks = self._keyword(idx, part)
        names = op.pk_vars
        for pk in pks:
            emit(dict(zip(names, pk)))

    def _btree(self, idx, width):
        op, t = self.op, self.task
        lo, hi = t.constant(op.lo), t.constant(op.hi)
        if (op.lo is not None and lo is None) or (op.hi is not None and hi is None):
            return
        for key, _v in idx.search((lo,) if op.lo is not None else None, (hi,) if op.hi is not None else None,
                                  op.lo_inclusive, op.hi_inclusive):
            yield key[width:]

    def _rtree(self, idx):
        op, t = self.op, self.task
        g = t.constant(op.geometry)
        if g is None:
            return
        x0, y0, x1, y1 = mbr(g)
        if op.radius is not None:
            r = t.constant(op.radius)
            if r is None:
                return
            x0, y0, x1, y1 = x0 - r, y0 - r, x1 + r, y1 + r
        for key, _v in idx.spatial_search((x0, y0, x1, y1)):
            yield key[1:]

    def _keyword(self, idx, part):
        v = self.task.constant(self.op.tokens)
        if v is None:
            return
        if isinstance(v, str):
            toks = set(word_token_list(v))
        elif isinstance(v, (list, Bag)):
            toks = {x for x in v if isinstance(x, str)}
        else:
            raise TypeMismatch(f"keyword search expects a string or collection, got {type_name(v)}")
        if not toks:
            # two empty token sets are fully similar: every record is a candidate
            for pk, _rec in part.primary.scan():
                yield pk
            return
        seen = set()
        for tok in sorted(toks):
            for key, _v in idx.search((tok,), (tok,)):
                pk = key[1:]
                sk = key_of(pk)
                if sk not in seen:
                    seen.add(sk)
                    yield pk


# ------------------------------------------------------------ record access

class PrimaryLookupOp(Instance):
    """Fetches each candidate under a short primary-key lock."""

    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.op = op

    def run(self, activity, inputs, emit):
        op, t = self.op, self.task
        store = t.store(op.dataset)
        hook = t.hooks.get("before_primary_lookup")
        first = True
        for tup in inputs[0]:
            if first and hook is not None:
                hook(op.dataset, self.p)
            first = False
            pk = tuple(tup[v] for v in op.pk_vars)
            rec = t.txn.locked_get(store, pk)
            if rec is None:
                continue  # deleted since the index was read
            out = dict(tup)
            out[op.var] = rec
            emit(out)


class IndexJoinOp(Instance):
    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.op = op
        self.key = task.compile(op.key)

    def run(self, activity, inputs, emit):
        op = self.op
        store = self.task.store(op.dataset)
        var, key = op.var, self.key
        if op.index.is_primary:
            for t in inputs[0]:
                k = key(t)
                if k is None:
                    continue
                rec = store.get((k,))
                if rec is not None:
                    out = dict(t)
                    out[var] = rec
                    emit(out)
            return
        part = store.partitions[self.p]
        idx = part.index(op.index.name)
        width = len(op.index.fields)
        for t in inputs[0]:
            k = key(t)
            if k is None:
                continue
            for ikey, _v in idx.search((k,), (k,)):
                rec = part.primary.get(ikey[width:])
                if rec is not None:
                    out = dict(t)
                    out[var] = rec
                    emit(out)


# ---------------------------------------------------------------- streaming

class SelectOp(Instance):
    def __init__(self, p, task, cond):
        super().__init__(p, task)
        self.cond = task.compile(cond)

    def run(self, activity, inputs, emit):
        cond, truthy = self.cond, ops.truthy
        for t in inputs[0]:
            if truthy(cond(t)):
                emit(t)


class AssignOp(Instance):
    def __init__(self, p, task, var, expr):
        super().__init__(p, task)
        self.var, self.f = var, task.compile(expr)

    def run(self, activity, inputs, emit):
        var, f = self.var, self.f
        for t in inputs[0]:
            out = dict(t)
            out[var] = f(t)
            emit(out)


class UnnestOp(Instance):
    def __init__(self, p, task, var, expr):
        super().__init__(p, task)
        self.var, self.f = var, task.compile(expr)

    def run(self, activity, inputs, emit):
        var, f = self.var, self.f
        for t in inputs[0]:
            for item in iterate(f(t)):
                out = dict(t)
                out[var] = item
                emit(out)


# --------------------------------------------------------------------- joins

class HashJoinOp(Instance):
    """Build on the right input (port 1), probe with the left (port 0)."""

    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.lk = [task.compile(k) for k in op.left_keys]
        self.rk = [task.compile(k) for k in op.right_keys]
        self.cond = task.compile(op.cond)
        self.table = HybridHashTable(task.join_budget, temp_dir=task.temp_dir)

    def run(self, activity, inputs, emit):
        if activity == "build":
            for t in inputs[1]:
                self.table.add(join_key([f(t) for f in self.rk]), t)
            return
        cond, truthy = self.cond, ops.truthy

        def out(left, right):
            m = dict(left)
            m.update(right)
            if cond is None or truthy(cond(m)):
                emit(m)

        for t in inputs[0]:
            for r in self.table.probe(join_key([f(t) for f in self.lk]), t):
                out(t, r)
        for left, right in self.table.finish():
            out(left, right)

    def close(self):
        self.table.discard()


class NestedLoopJoinOp(Instance):
    """Materialize the right input (port 1), then stream the left past it."""

    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.cond = task.compile(op.cond)
        self.inner: list = []

    def run(self, activity, inputs, emit):
        if activity == "materialize":
            self.inner = list(inputs[1])
            return
        cond, truthy, inner = self.cond, ops.truthy, self.inner
        for t in inputs[0]:
            for r in inner:
                m = dict(t)
                m.update(r)
                if cond is None or truthy(cond(m)):
                    emit(m)


# ---------------------------------------------------------- blocking / misc

class SortOp(Instance):
    """Run generation (input) then merge (output)."""

    def __init__(self, p, task, key):
        super().__init__(p, task)
        self.sorter = ExternalSorter(key, task.sort_budget, task.temp_dir)

    def run(self, activity, inputs, emit):
        if activity == "rungen":
            for t in inputs[0]:
                self.sorter.add(t)
            return
        for t in self.sorter.sorted():
            emit(t)

    def close(self):
        self.sorter.discard()


def make_sort_key(task: TaskContext, op):
    """Key function shared by a sort and the merging connector above it."""
    if op.purpose == "pk":
        fs = [task.compile(x) for x, _d in op.keys]
        return lambda t: key_of([f(t) for f in fs])
    fs = [task.compile(x) for x, _d in op.keys]
    desc = [d for _x, d in op.keys]
    return lambda t: (order_key([f(t) for f in fs], desc), env_key(t))


class OrderSortOp(SortOp):
    """An order-by sort: also checks that each key position holds one class."""

    def __init__(self, p, task, op):
        super().__init__(p, task, make_sort_key(task, op))
        self.fs = [task.compile(x) for x, _d in op.keys]

    def run(self, activity, inputs, emit):
        if activity == "rungen":
            seen = [None] * len(self.fs)
            for t in inputs[0]:
                check_order_classes(seen, [f(t) for f in self.fs])
                self.sorter.add(t)
            return
        super().run(activity, inputs, emit)


class GroupOp(Instance):
    """Hash grouping; groups are emitted in order of first appearance."""

    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.keys = [(v, task.compile(x)) for v, x in op.keys]
        self.with_vars = op.with_vars

    def run(self, activity, inputs, emit):
        groups: dict = {}
        for t in inputs[0]:
            vals = [f(t) for _v, f in self.keys]
            g = groups.setdefault(group_key(vals), (vals, []))
            g[1].append(t)
        for vals, members in groups.values():
            out = {v: x for (v, _f), x in zip(self.keys, vals)}
            for w in self.with_vars:
                out[w] = Bag(m.get(w) for m in members)
            emit(out)


class AggregateOp(Instance):
    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.op = op
        self.agg = AGGREGATES[op.fn]
        self.f = task.compile(op.expr) if op.phase != "global" else None

    def run(self, activity, inputs, emit):
        agg, op = self.agg, self.op
        s = agg.init()
        if op.phase == "global":
            for t in inputs[0]:
                s = agg.combine(s, t[STATE])
        else:
            f = self.f
            for t in inputs[0]:
                s = agg.step(s, f(t))
        if op.phase == "local":
            emit({STATE: s})
        else:
            emit({op.var: agg.finalize(s)})


class LimitOp(Instance):
    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.op = op

    def run(self, activity, inputs, emit):
        n = limit_value(self.task.constant(self.op.limit), "limit")
        skip = limit_value(self.task.constant(self.op.offset), "offset") if self.op.offset is not None else 0
        i = 0
        for t in inputs[0]:
            # keep draining after the limit so producers never block
            if skip <= i < skip + n:
                emit(t)
            i += 1


# --------------------------------------------------------------------- sinks

class ResultOp(Instance):
    def __init__(self, p, task, expr):
        super().__init__(p, task)
        self.f = task.compile(expr)

    def run(self, activity, inputs, emit):
        out = self.task.results.setdefault(self.p, [])
        f = self.f
        for t in inputs[0]:
            out.append(f(t))


class InsertOp(Instance):
    """Conformance check, then one record transaction per record."""

    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.op = op

    def run(self, activity, inputs, emit):
        ds, t = self.op.dataset, self.task
        store = t.store(ds)
        resolver = t.catalog.resolver(ds.dataverse)
        dt = resolver.get(ds.type_name)
        n = 0
        for tup in inputs[0]:
            rec = tup[self.op.var]
            report = conforms(rec, ds.type_name, resolver)
            if not report.ok:
                raise ConformanceError(report)
            t.txn.insert(store, coerce(rec, dt.body, resolver))
            n += 1
        t.mutations[self.p] = t.mutations.get(self.p, 0) + n


class DeleteOp(Instance):
    def __init__(self, p, task, op):
        super().__init__(p, task)
        self.op = op

    def run(self, activity, inputs, emit):
        store = self.task.store(self.op.dataset)
        n = 0
        for tup in inputs[0]:
            if self.task.txn.delete(store, store.pk_of(tup[self.op.var])):
                n += 1
        self.task.mutations[self.p] = self.task.mutations.get(self.p, 0) + n

