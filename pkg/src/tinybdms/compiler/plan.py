"""Algebraic plan operators.

One operator tree serves both phases: translation builds a direct plan out of
scans, selects, assigns and nested-loop joins; the rewrite rules replace parts
of it with index searches, hash joins and split aggregates and finally insert
:class:`Exchange` operators wherever the partitioning changes. Every operator
carries ``inputs`` (a list) and, after the physical phase, ``prop`` (its output
partitioning).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..aql import ast as A
from ..aql.printer import print_expr
from ..catalog.model import DatasetDef, IndexDef


@dataclass(frozen=True)
class Partitioning:
    """``n`` partitions; ``keys`` are the hash expressions when the data is
    hash-partitioned by the storage hash function (``None`` otherwise)."""

    n: int
    keys: tuple | None = None

    def describe(self) -> str:
        if self.n == 1:
            return "singleton"
        if self.keys is None:
            return f"unpartitioned x{self.n}"
        return f"hash({', '.join(print_expr(k) for k in self.keys)}) x{self.n}"


@dataclass(eq=False)
class Op:
    inputs: list = field(default_factory=list, kw_only=True)
    prop: Partitioning | None = field(default=None, kw_only=True)

    def produces(self) -> tuple:
        """Variables this operator adds to its input schema."""
        return ()

    def label(self) -> str:
        return type(self).__name__


@dataclass(eq=False)
class EmptySource(Op):
    """Emits one empty tuple (the input of constant expressions and lets)."""

    def label(self):
        return "empty-tuple-source"


@dataclass(eq=False)
class DataScan(Op):
    var: str
    dataset: DatasetDef

    def produces(self):
        return (self.var,)

    def label(self):
        kind = "dataset-scan" if self.dataset.internal else "external-scan"
        return f"{kind} {self.dataset.qualified} -> ${self.var}"


@dataclass(eq=False)
class PrimarySearch(Op):
    """Range search on the primary index (single-field primary keys)."""

    var: str
    dataset: DatasetDef
    lo: A.Expr | None = None
    hi: A.Expr | None = None
    lo_inclusive: bool = True
    hi_inclusive: bool = True

    def produces(self):
        return (self.var,)

    def label(self):
        return f"primary-index-search {self.dataset.qualified} {_range(self)} -> ${self.var}"


@dataclass(eq=False)
class SecondarySearch(Op):
    """Search of a secondary index; emits the primary keys of the hits.

    btree: ``lo``/``hi`` bounds; rtree: ``geometry`` (plus ``radius`` for a
    distance predicate); keyword: ``tokens`` (collection or string).
    """

    dataset: DatasetDef
    index: IndexDef
    pk_vars: tuple
    lo: A.Expr | None = None
    hi: A.Expr | None = None
    lo_inclusive: bool = True
    hi_inclusive: bool = True
    geometry: A.Expr | None = None
    radius: A.Expr | None = None
    tokens: A.Expr | None = None
    min_overlap: int = 1

    def produces(self):
        return self.pk_vars

    def label(self):
        ix = self.index
        if ix.index_type == "btree":
            what = _range(self)
        elif ix.index_type == "rtree":
            what = f"intersects mbr({print_expr(self.geometry)})"
            if self.radius is not None:
                what += f" within {print_expr(self.radius)}"
        else:
            what = f"tokens of {print_expr(self.tokens)}"
        pks = ", ".join("$" + v for v in self.pk_vars)
        return f"secondary-index-search {self.dataset.qualified}.{ix.name} ({ix.index_type}) {what} -> [{pks}]"


@dataclass(eq=False)
class PrimaryLookup(Op):
    """Fetch records by primary key (point lookups in sorted key order)."""

    var: str
    dataset: DatasetDef
    pk_vars: tuple

    def produces(self):
        return (self.var,)

    def label(self):
        pks = ", ".join("$" + v for v in self.pk_vars)
        return f"primary-index-search {self.dataset.qualified} by [{pks}] -> ${self.var}"


@dataclass(eq=False)
class Select(Op):
    cond: A.Expr
    post_validation: bool = False

    def label(self):
        kind = "select (post-validation)" if self.post_validation else "select"
        return f"{kind} {print_expr(self.cond)}"


@dataclass(eq=False)
class Assign(Op):
    var: str
    expr: A.Expr

    def produces(self):
        return (self.var,)

    def label(self):
        return f"assign ${self.var} := {print_expr(self.expr)}"


@dataclass(eq=False)
class Unnest(Op):
    var: str
    expr: A.Expr

    def produces(self):
        return (self.var,)

    def label(self):
        return f"unnest ${self.var} in {print_expr(self.expr)}"


@dataclass(eq=False)
class Join(Op):
    """inputs = [left, right]. ``method`` is nested-loop or hash; a hash join
    matches ``left_keys[i] = right_keys[i]`` and then applies ``cond``."""

    cond: A.Expr | None = None
    method: str = "nested-loop"
    left_keys: tuple = ()
    right_keys: tuple = ()

    def label(self):
        if self.method == "hash":
            pairs = " and ".join(f"{print_expr(a)} = {print_expr(b)}" for a, b in zip(self.left_keys, self.right_keys))
            extra = f" where {print_expr(self.cond)}" if self.cond is not None else ""
            return f"hash-join {pairs}{extra}"
        return f"nested-loop-join {print_expr(self.cond) if self.cond is not None else 'true'}"


@dataclass(eq=False)
class IndexJoin(Op):
    """Index nested-loop join: for each outer tuple probe ``index`` of
    ``dataset`` with ``key`` and bind the matching records to ``var``."""

    var: str
    dataset: DatasetDef
    index: IndexDef
    key: A.Expr
    field_path: tuple

    def produces(self):
        return (self.var,)

    def label(self):
        ix = "primary" if self.index.is_primary else self.index.name
        return (f"index-nested-loop-join {self.dataset.qualified}.{ix} "
                f"${self.var}.{'.'.join(self.field_path)} = {print_expr(self.key)} -> ${self.var}")


@dataclass(eq=False)
class Group(Op):
    keys: tuple  # ((var, expr), ...)
    with_vars: tuple

    def produces(self):
        return tuple(v for v, _ in self.keys) + tuple(self.with_vars)

    def label(self):
        ks = ", ".join(f"${v} := {print_expr(x)}" for v, x in self.keys)
        ws = ", ".join("$" + w for w in self.with_vars)
        return f"group by {ks} with {ws}" if ws else f"group by {ks}"


@dataclass(eq=False)
class Aggregate(Op):
    var: str
    fn: str
    expr: A.Expr
    phase: str = "complete"  # complete | local | global

    def produces(self):
        return (self.var,)

    def label(self):
        if self.phase == "global":
            return f"aggregate (global) ${self.var} := {self.fn}(partial states)"
        tag = " (local)" if self.phase == "local" else ""
        return f"aggregate{tag} ${self.var} := {self.fn}({print_expr(self.expr)})"


@dataclass(eq=False)
class Sort(Op):
    keys: tuple  # ((expr, descending), ...)
    purpose: str = "order"  # order | pk

    def label(self):
        ks = ", ".join(f"{print_expr(x)} {'desc' if d else 'asc'}" for x, d in self.keys)
        return f"sort (primary keys) {ks}" if self.purpose == "pk" else f"sort {ks}"


@dataclass(eq=False)
class Limit(Op):
    limit: A.Expr
    offset: A.Expr | None = None

    def label(self):
        off = f" offset {print_expr(self.offset)}" if self.offset is not None else ""
        return f"limit {print_expr(self.limit)}{off}"


@dataclass(eq=False)
class Exchange(Op):
    """A connector boundary: MToNPartitioning (``keys``), MToNReplicating,
    MToNPartitioningMerging (``sort_keys``) or OneToOne."""

    kind: str
    n: int
    keys: tuple = ()
    sort_keys: tuple = ()

    def label(self):
        if self.kind == "MToNPartitioning":
            how = f" by hash({', '.join(print_expr(k) for k in self.keys)})" if self.keys else " (gather)"
        elif self.kind == "MToNPartitioningMerging":
            how = " merging on " + ", ".join(f"{print_expr(x)} {'desc' if d else 'asc'}" for x, d in self.sort_keys)
        else:
            how = ""
        return f"exchange {self.kind}{how} -> {self.n}"


@dataclass(eq=False)
class Result(Op):
    expr: A.Expr
    ordered: bool = False

    def label(self):
        return f"distribute-result {print_expr(self.expr)}"


@dataclass(eq=False)
class InsertSink(Op):
    dataset: DatasetDef
    var: str

    def label(self):
        return f"insert ${self.var} into {self.dataset.qualified}"


@dataclass(eq=False)
class DeleteSink(Op):
    dataset: DatasetDef
    var: str

    def label(self):
        return f"delete ${self.var} from {self.dataset.qualified}"


def _range(op) -> str:
    lo = ("[" if op.lo_inclusive else "(") + (print_expr(op.lo) if op.lo is not None else "-inf")
    hi = (print_expr(op.hi) if op.hi is not None else "+inf") + ("]" if op.hi_inclusive else ")")
    return f"{lo}, {hi}"


def schema(op: Op) -> frozenset:
    """Variables bound in the output tuples of ``op``."""
    # grouping and aggregation end the scope of everything below them
    if isinstance(op, (Group, Aggregate, SecondarySearch, DataScan, PrimarySearch, EmptySource)):
        return frozenset(op.produces())
    out = frozenset(op.produces())
    for i in op.inputs:
        out |= schema(i)
    return out


def walk(op: Op):
    """Post-order (dataflow order): inputs before their consumer."""
    for i in op.inputs:
        yield from walk(i)
    yield op


def explain(root: Op) -> str:
    """Stable text form: one line per operator in dataflow order, each with a
    ``#n`` id and the ids of its inputs."""
    ids = {}
    lines = []
    for op in walk(root):
        ids[id(op)] = len(ids) + 1
        src = ""
        if op.inputs:
            src = " <- " + ", ".join(f"#{ids[id(i)]}" for i in op.inputs)
        part = f"  {{{op.prop.describe()}}}" if op.prop is not None else ""
        lines.append(f"#{ids[id(op)]} {op.label()}{src}{part}")
    return "\n".join(lines)
