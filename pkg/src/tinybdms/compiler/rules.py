"""Rewrite rules.

Logical phase, applied once each in this order:

``push-selects``
    split conjunctions and move each conjunct down to the lowest operator
    whose schema covers its variables; conjuncts spanning both join inputs
    become join conditions.
``choose-join-method``
    equijoins become hash joins; an equality carrying the ``indexnl`` hint
    becomes an index nested-loop join when one side is a scan of a dataset
    with a B-tree (primary or secondary) index on the compared field.
``select-access-path``
    selections over a dataset scan use the primary index or a secondary
    index covering one of the conjuncts. A secondary search is followed by a
    sort of the primary keys, the primary lookup and a post-validation select
    that re-checks the conjuncts the index answered.

Physical phase (``assign-partitioning``): every operator gets its output
partitioning; exchanges are inserted only where an operator needs a
partitioning its input does not have, and aggregates are split into a local
part per partition and a global part on one partition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from ..aql import ast as A
from . import plan as P
from .expr import free_vars

LOGICAL_RULES = ("push-selects", "choose-join-method", "select-access-path")
PHYSICAL_RULES = ("assign-partitioning",)


def conjuncts(e: A.Expr) -> list:
    if isinstance(e, A.BinaryOp) and e.op == "and":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def conjoin(parts) -> A.Expr | None:
    parts = list(parts)
    if not parts:
        return None
    out = parts[0]
    for p in parts[1:]:
        out = A.BinaryOp("and", out, p)
    return out


def has_hint(e, kind: str) -> bool:
    return any(h.kind == kind for h in getattr(e, "hints", ()))


def field_path(e: A.Expr, var: str) -> tuple | None:
    """``("a", "b")`` if ``e`` is ``$var.a.b``."""
    names = []
    while isinstance(e, A.FieldAccess):
        names.append(e.name)
        e = e.expr
    if isinstance(e, A.VarRef) and e.name == var and names:
        return tuple(reversed(names))
    return None


def path_expr(var: str, path) -> A.Expr:
    e: A.Expr = A.VarRef(var)
    for name in path:
        e = A.FieldAccess(e, name)
    return e


# ---------------------------------------------------------------- push-selects

def _with_select(node: P.Op, cond: A.Expr) -> P.Op:
    if isinstance(node, P.Select) and not node.post_validation:
        node.cond = A.BinaryOp("and", node.cond, cond)
        return node
    return P.Select(cond, inputs=[node])


def _place(node: P.Op, c: A.Expr) -> bool:
    """Try to move conjunct ``c`` into the subtree below ``node`` (mutating
    it). Returns False when ``c`` has to stay above ``node``."""
    fv = free_vars(c)
    if isinstance(node, P.Join):
        left, right = node.inputs
        ls, rs = P.schema(left), P.schema(right)
        if fv <= ls:
            node.inputs[0] = _place_or_wrap(left, c)
        elif fv <= rs:
            node.inputs[1] = _place_or_wrap(right, c)
        elif fv <= ls | rs:
            node.cond = c if node.cond is None else A.BinaryOp("and", node.cond, c)
        else:
            return False
        return True
    if isinstance(node, (P.Assign, P.Unnest)) and node.var not in fv:
        node.inputs[0] = _place_or_wrap(node.inputs[0], c)
        return True
    if isinstance(node, P.Select) and not node.post_validation:
        if _place(node.inputs[0], c):
            return True
    return False


def _place_or_wrap(node: P.Op, c: A.Expr) -> P.Op:
    if _place(node, c):
        return node
    return _with_select(node, c)


def push_selects(op: P.Op) -> P.Op:
    op.inputs = [push_selects(i) for i in op.inputs]
    if isinstance(op, P.Select) and not op.post_validation:
        child = op.inputs[0]
        for c in conjuncts(op.cond):
            child = _place_or_wrap(child, c)
        return child
    return op


# ------------------------------------------------------- choose-join-method

def _scan_below_selects(node: P.Op):
    """``(scan, conds)`` if ``node`` is selects over an internal dataset scan."""
    conds = []
    while isinstance(node, P.Select) and not node.post_validation:
        conds = conjuncts(node.cond) + conds
        node = node.inputs[0]
    if isinstance(node, P.DataScan) and node.dataset.internal:
        return node, conds
    return None, None


def _btree_index_for(catalog, ds, path):
    """Primary index if ``path`` is the (single-field) primary key, else a
    single-field secondary B-tree on ``path``."""
    if ds.primary_key == (path,):
        return catalog.indexes.get((ds.dataverse, ds.name, ds.name))
    for ix in catalog.secondary_indexes(ds.dataverse, ds.name):
        if ix.index_type == "btree" and ix.fields[0] == path:
            return ix
    return None


def _index_join(catalog, node: P.Join, pairs, hinted, rest):
    """Build an index nested-loop join for the hinted equality, or None."""
    a, b = hinted  # a over the left input, b over the right input
    for inner_side, inner_key, outer_key in ((1, b, a), (0, a, b)):
        scan, conds = _scan_below_selects(node.inputs[inner_side])
        if scan is None:
            continue
        path = field_path(inner_key, scan.var)
        if path is None:
            continue
        ix = _btree_index_for(catalog, scan.dataset, path)
        if ix is None:
            continue
        outer = node.inputs[1 - inner_side]
        cur: P.Op = P.IndexJoin(scan.var, scan.dataset, ix, outer_key, path, inputs=[outer])
        used = A.BinaryOp("=", inner_key, outer_key)
        if not ix.is_primary:
            cur = P.Select(used, post_validation=True, inputs=[cur])
        others = [A.BinaryOp("=", x, y) for (x, y) in pairs if (x, y) != hinted]
        residual = conds + others + rest
        if residual:
            cur = P.Select(conjoin(residual), inputs=[cur])
        return cur
    return None


def choose_joins(op: P.Op, catalog) -> P.Op:
    op.inputs = [choose_joins(i, catalog) for i in op.inputs]
    if not isinstance(op, P.Join) or op.cond is None:
        return op
    ls, rs = P.schema(op.inputs[0]), P.schema(op.inputs[1])
    pairs, rest, hinted = [], [], None
    for c in conjuncts(op.cond):
        if isinstance(c, A.BinaryOp) and c.op == "=":
            fl, fr = free_vars(c.left), free_vars(c.right)
            pair = None
            if fl and fr and fl <= ls and fr <= rs:
                pair = (c.left, c.right)
            elif fl and fr and fl <= rs and fr <= ls:
                pair = (c.right, c.left)
            if pair is not None:
                pairs.append(pair)
                if hinted is None and has_hint(c, "indexnl"):
                    hinted = pair
                continue
        rest.append(c)
    if hinted is not None:
        inl = _index_join(catalog, op, pairs, hinted, rest)
        if inl is not None:
            return inl
    if pairs:
        op.method = "hash"
        op.left_keys = tuple(a for a, _ in pairs)
        op.right_keys = tuple(b for _, b in pairs)
        op.cond = conjoin(rest)
    return op


# ------------------------------------------------------- select-access-path

_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}


@dataclass
class _Match:
    conj: A.Expr
    kind: str  # btree | rtree | keyword
    path: tuple
    op: str = ""  # btree comparison
    const: A.Expr | None = None
    radius: A.Expr | None = None


def _const(e) -> bool:
    return not free_vars(e)


def _match(c: A.Expr, var: str) -> _Match | None:
    if has_hint(c, "skip-index"):
        return None
    if isinstance(c, A.BinaryOp) and c.op in _FLIP:
        for lhs, rhs, op in ((c.left, c.right, c.op), (c.right, c.left, _FLIP[c.op])):
            path = field_path(lhs, var)
            if path is not None and _const(rhs):
                return _Match(c, "btree", path, op, rhs)
        # spatial-distance(path, const) <= r
        if c.op in ("<=", "<") and isinstance(c.left, A.Call) and c.left.name == "spatial-distance" \
                and _const(c.right):
            x, y = c.left.args
            for g, q in ((x, y), (y, x)):
                path = field_path(g, var)
                if path is not None and _const(q):
                    return _Match(c, "rtree", path, const=q, radius=c.right)
        return None
    if isinstance(c, A.Call) and c.name == "spatial-intersect":
        x, y = c.args
        for g, q in ((x, y), (y, x)):
            path = field_path(g, var)
            if path is not None and _const(q):
                return _Match(c, "rtree", path, const=q)
        return None
    if isinstance(c, A.FuzzyEq) and c.simfunction == "jaccard" and c.threshold > 0:
        for g, q in ((c.left, c.right), (c.right, c.left)):
            path = field_path(g, var)
            if path is not None and _const(q):
                return _Match(c, "keyword", path, const=q)
        return None
    if isinstance(c, A.Quantified) and c.kind == "some" and len(c.bindings) == 1:
        w, coll = c.bindings[0]
        sat = c.satisfies
        if isinstance(coll, A.Call) and coll.name == "word-tokens" and isinstance(sat, A.BinaryOp) \
                and sat.op == "=":
            path = field_path(coll.args[0], var)
            for a, b in ((sat.left, sat.right), (sat.right, sat.left)):
                if path is not None and a == A.VarRef(w) and _const(b):
                    return _Match(c, "keyword", path, const=A.ListCons((b,)))
    return None


def _btree_plan(matches):
    """Combine B-tree matches on one field into ``(lo, lo_inc, hi, hi_inc, used)``;
    an equality wins, otherwise the first lower and first upper bound."""
    for m in matches:
        if m.op == "=":
            return m.const, True, m.const, True, [m.conj]
    lo = hi = None
    used = []
    lo_inc = hi_inc = True
    for m in matches:
        if m.op in (">", ">=") and lo is None:
            lo, lo_inc = m.const, m.op == ">="
            used.append(m.conj)
        elif m.op in ("<", "<=") and hi is None:
            hi, hi_inc = m.const, m.op == "<="
            used.append(m.conj)
    return lo, lo_inc, hi, hi_inc, used


class _AccessPaths:
    def __init__(self, catalog, fresh):
        self.catalog = catalog
        self.fresh = fresh

    def rewrite(self, op: P.Op) -> P.Op:
        scan, conds = _scan_below_selects(op)
        if scan is not None and conds:
            new = self.choose(scan, conds)
            if new is not None:
                return new
        op.inputs = [self.rewrite(i) for i in op.inputs]
        return op

    def choose(self, scan: P.DataScan, conds):
        ds, var = scan.dataset, scan.var
        matches = [m for m in (_match(c, var) for c in conds) if m is not None]
        if not matches:
            return None
        by_path: dict = {}
        for m in matches:
            by_path.setdefault((m.kind, m.path), []).append(m)
        # 1. the primary index
        if len(ds.primary_key) == 1 and ("btree", ds.primary_key[0]) in by_path:
            lo, lo_inc, hi, hi_inc, _used = _btree_plan(by_path[("btree", ds.primary_key[0])])
            cur = P.PrimarySearch(var, ds, lo, hi, lo_inc, hi_inc)
            return P.Select(conjoin(conds), inputs=[cur])  # re-checks the bounds as well
        # 2. secondary indexes: equality, then two-sided range, then the rest
        best = None
        for ix in self.catalog.secondary_indexes(ds.dataverse, ds.name):
            path = ix.fields[0]
            ms = by_path.get((ix.index_type, path))
            if not ms:
                continue
            if ix.index_type == "btree":
                lo, lo_inc, hi, hi_inc, used = _btree_plan(ms)
                rank = 0 if (lo is hi and lo is not None) else (1 if lo is not None and hi is not None else 2)
                cand = (rank, ix.name, ix, dict(lo=lo, hi=hi, lo_inclusive=lo_inc, hi_inclusive=hi_inc), used)
            elif ix.index_type == "rtree":
                m = ms[0]
                cand = (3, ix.name, ix, dict(geometry=m.const, radius=m.radius), [m.conj])
            else:
                m = ms[0]
                cand = (4, ix.name, ix, dict(tokens=m.const), [m.conj])
            if best is None or cand[:2] < best[:2]:
                best = cand
        if best is None:
            return None
        _rank, _name, ix, args, used = best
        pk_vars = tuple(self.fresh("pk") for _ in ds.primary_key)
        cur: P.Op = P.SecondarySearch(ds, ix, pk_vars, **args)
        cur = P.Sort(tuple((A.VarRef(v), False) for v in pk_vars), "pk", inputs=[cur])
        cur = P.PrimaryLookup(var, ds, pk_vars, inputs=[cur])
        cur = P.Select(conjoin(used), post_validation=True, inputs=[cur])
        rest = [c for c in conds if not any(c is u for u in used)]
        if rest:
            cur = P.Select(conjoin(rest), inputs=[cur])
        return cur


# ------------------------------------------------------------ physical phase

def _pk_exprs(var: str, ds) -> tuple:
    return tuple(path_expr(var, p) for p in ds.primary_key)


class _Physical:
    def __init__(self, parallelism: int):
        self.N = parallelism

    def ensure_hash(self, child: P.Op, keys: tuple, n: int) -> P.Op:
        p = child.prop
        if p.n == n and (n == 1 or p.keys == keys):
            return child
        return P.Exchange("MToNPartitioning", n, keys, inputs=[child], prop=P.Partitioning(n, keys))

    def run(self, op: P.Op) -> P.Op:
        op.inputs = [self.run(i) for i in op.inputs]
        m = getattr(self, "_" + type(op).__name__, None)
        if m is not None:
            return m(op)
        op.prop = op.inputs[0].prop  # streaming operators inherit
        return op

    def _EmptySource(self, op):
        op.prop = P.Partitioning(1)
        return op

    def _DataScan(self, op):
        ds = op.dataset
        op.prop = P.Partitioning(ds.partitions, _pk_exprs(op.var, ds)) if ds.internal else P.Partitioning(1)
        return op

    def _PrimarySearch(self, op):
        op.prop = P.Partitioning(op.dataset.partitions, _pk_exprs(op.var, op.dataset))
        return op

    def _SecondarySearch(self, op):
        op.prop = P.Partitioning(op.dataset.partitions, tuple(A.VarRef(v) for v in op.pk_vars))
        return op

    def _PrimaryLookup(self, op):
        op.prop = P.Partitioning(op.dataset.partitions, _pk_exprs(op.var, op.dataset))
        return op

    def _Join(self, op):
        left, right = op.inputs
        if op.method == "hash":
            n = self.N if max(left.prop.n, right.prop.n) > 1 else 1
            op.inputs = [self.ensure_hash(left, op.left_keys, n), self.ensure_hash(right, op.right_keys, n)]
            op.prop = P.Partitioning(n, op.left_keys if n > 1 else None)
            return op
        n = left.prop.n
        if not (n == 1 and right.prop.n == 1):
            op.inputs = [left, P.Exchange("MToNReplicating", n, inputs=[right], prop=P.Partitioning(n))]
        op.prop = left.prop
        return op

    def _IndexJoin(self, op):
        outer = op.inputs[0]
        n = op.dataset.partitions
        if op.index.is_primary:
            op.inputs = [self.ensure_hash(outer, (op.key,), n)]
        elif not (n == 1 and outer.prop.n == 1):
            op.inputs = [P.Exchange("MToNReplicating", n, inputs=[outer], prop=P.Partitioning(n))]
        op.prop = P.Partitioning(n, _pk_exprs(op.var, op.dataset))
        return op

    def _Group(self, op):
        child = op.inputs[0]
        n = 1 if child.prop.n == 1 else self.N
        keys = tuple(x for _v, x in op.keys)
        op.inputs = [self.ensure_hash(child, keys, n)]
        op.prop = P.Partitioning(n, tuple(A.VarRef(v) for v, _x in op.keys) if n > 1 else None)
        return op

    def _Aggregate(self, op):
        child = op.inputs[0]
        local = P.Aggregate(op.var, op.fn, op.expr, "local", inputs=[child], prop=child.prop)
        src: P.Op = local
        if child.prop.n > 1:
            src = P.Exchange("MToNReplicating", 1, inputs=[local], prop=P.Partitioning(1))
        return P.Aggregate(op.var, op.fn, op.expr, "global", inputs=[src], prop=P.Partitioning(1))

    def _Sort(self, op):
        child = op.inputs[0]
        op.prop = child.prop
        if op.purpose == "pk" or child.prop.n == 1:
            return op
        return P.Exchange("MToNPartitioningMerging", 1, sort_keys=op.keys, inputs=[op], prop=P.Partitioning(1))

    def _Limit(self, op):
        child = op.inputs[0]
        if child.prop.n > 1:
            op.inputs = [P.Exchange("MToNPartitioning", 1, inputs=[child], prop=P.Partitioning(1))]
        op.prop = P.Partitioning(1)
        return op

    def _InsertSink(self, op):
        ds = op.dataset
        op.inputs = [self.ensure_hash(op.inputs[0], _pk_exprs(op.var, ds), ds.partitions)]
        op.prop = op.inputs[0].prop
        return op

    _DeleteSink = _InsertSink


# ------------------------------------------------------------------ driver

def optimize(root: P.Op, catalog, parallelism: int, fresh=None, trace=None) -> P.Op:
    """Apply the logical rules, then the physical phase. ``trace`` (a list)
    receives the names of the rules in application order."""
    fresh = fresh or (lambda base, _c=itertools.count(1): f"#{base}{next(_c)}")
    root = push_selects(root)
    root = choose_joins(root, catalog)
    root = _AccessPaths(catalog, fresh).rewrite(root)
    if trace is not None:
        trace.extend(LOGICAL_RULES)
    return physical(root, parallelism, trace)


def physical(root: P.Op, parallelism: int, trace=None) -> P.Op:
    root = _Physical(parallelism).run(root)
    if trace is not None:
        trace.extend(PHYSICAL_RULES)
    return root
