"""Expression compilation to Python closures.

``ExprCompiler(ctx).compile(e)`` returns ``f(env) -> value`` where ``env`` maps
variable names to ADM values. Nested FLWOR, quantified expressions and
dataset references are evaluated in place by a small tuple-at-a-time
interpreter; the datasets they read are scanned once per job and cached in the
:class:`EvalContext`.
"""

from __future__ import annotations

import datetime as _dt
import threading

from ..adm.binary import encode_key_tuple
from ..adm.compare import comparison_class, sort_key
from ..adm.values import Bag, type_name
from ..aql import ast as A
from ..errors import QueryError, TypeMismatch
from ..functions import lookup
from ..functions import ops
from ..functions.strings import edit_distance, similarity_jaccard

BINARY = {
    "+": ops.add, "-": ops.sub, "*": ops.mul, "/": ops.div, "%": ops.mod,
    "=": ops.eq, "!=": ops.ne, "<": ops.lt, "<=": ops.le, ">": ops.gt, ">=": ops.ge,
}


class EvalContext:
    """Per-job evaluation state: the frozen clock and cached dataset reads."""

    def __init__(self, now: _dt.datetime | None = None, read_dataset=None):
        self.now = now or _dt.datetime.now().replace(microsecond=0)
        self._read = read_dataset
        self._cache: dict = {}
        self._lock = threading.Lock()

    def dataset(self, qname: A.QName) -> Bag:
        key = (qname.dataverse, qname.name)
        with self._lock:
            hit = self._cache.get(key)
            if hit is None:
                if self._read is None:
                    raise QueryError(f"no storage available to read dataset {qname}")
                hit = Bag(self._read(qname.dataverse, qname.name))
                self._cache[key] = hit
            return hit


def iterate(coll, what: str = "for"):
    """Items of a collection; null iterates as empty."""
    if coll is None:
        return ()
    if isinstance(coll, list):
        return coll
    if isinstance(coll, Bag):
        return coll.items
    raise TypeMismatch(f"{what} expects a collection, got {type_name(coll)}")


class _Desc:
    __slots__ = ("k",)

    def __init__(self, k):
        self.k = k

    def __lt__(self, other):
        return other.k < self.k

    def __eq__(self, other):
        return self.k == other.k


def order_key(values, descending) -> tuple:
    """Sort key of a tuple of order-by values (``descending`` per position)."""
    return tuple(_Desc(sort_key(v)) if d else sort_key(v) for v, d in zip(values, descending))


def env_key(t: dict) -> tuple:
    """Canonical sort key of a whole tuple: the tie-breaker that makes ordered
    output independent of the input order (and so of the partitioning)."""
    return tuple((k, sort_key(t[k])) for k in sorted(t))


def check_order_classes(seen: list, values) -> None:
    """Order-by keys must be mutually comparable: one class per key position
    (nulls aside)."""
    for i, v in enumerate(values):
        if v is None:
            continue
        c = comparison_class(v)
        if seen[i] is None:
            seen[i] = c
        elif seen[i] != c:
            raise TypeMismatch(f"order by key {i + 1} mixes {seen[i]} and {c} values")


def group_key(values) -> bytes:
    return encode_key_tuple(values)


def field_of(v, name: str):
    return v.get(name) if isinstance(v, dict) else None


class ExprCompiler:
    def __init__(self, ctx: EvalContext):
        self.ctx = ctx

    def compile(self, e: A.Expr):
        m = getattr(self, "_" + type(e).__name__, None)
        if m is None:
            raise QueryError(f"cannot evaluate {type(e).__name__}")
        return m(e)

    def _Literal(self, e):
        v = e.value
        return lambda env: v

    def _VarRef(self, e):
        name = e.name
        return lambda env: env[name]

    def _FieldAccess(self, e):
        inner = self.compile(e.expr)
        name = e.name

        def get(env):
            v = inner(env)
            return v.get(name) if isinstance(v, dict) else None
        return get

    def _IndexAccess(self, e):
        coll, idx = self.compile(e.expr), self.compile(e.index)

        def get(env):
            c, i = coll(env), idx(env)
            if c is None or i is None:
                return None
            if not isinstance(c, list):
                raise TypeMismatch(f"[ ] expects an ordered list, got {type_name(c)}")
            if not isinstance(i, int) or isinstance(i, bool):
                raise TypeMismatch(f"list index must be an integer, got {type_name(i)}")
            return c[i] if 0 <= i < len(c) else None
        return get

    def _DatasetRef(self, e):
        ctx, q = self.ctx, e.qname
        return lambda env: ctx.dataset(q)

    def _BinaryOp(self, e):
        left, right = self.compile(e.left), self.compile(e.right)
        if e.op == "and":
            def and_(env):
                a = left(env)
                if a is False:
                    return False
                return ops.and_(a, right(env))
            return and_
        if e.op == "or":
            def or_(env):
                a = left(env)
                if a is True:
                    return True
                return ops.or_(a, right(env))
            return or_
        fn = BINARY.get(e.op)
        if fn is None:
            raise QueryError(f"unknown operator {e.op}")
        return lambda env: fn(left(env), right(env))

    def _UnaryOp(self, e):
        x = self.compile(e.operand)
        if e.op == "-":
            return lambda env: ops.neg(x(env))
        return x

    def _FuzzyEq(self, e):
        left, right = self.compile(e.left), self.compile(e.right)
        t = e.threshold
        if e.simfunction == "edit-distance":
            def ed(env):
                a, b = left(env), right(env)
                if a is None or b is None:
                    return None
                return edit_distance(a, b) <= t
            return ed

        def jac(env):
            a, b = left(env), right(env)
            if a is None or b is None:
                return None
            return similarity_jaccard(a, b) >= t
        return jac

    def _IfThenElse(self, e):
        c, a, b = self.compile(e.cond), self.compile(e.then), self.compile(e.other)
        return lambda env: a(env) if c(env) is True else b(env)

    def _RecordCons(self, e):
        parts = [(k, self.compile(v)) for k, v in e.fields]

        def build(env):
            out = {}
            for k, f in parts:
                if k in out:
                    raise QueryError(f"duplicate field {k!r} in record constructor")
                out[k] = f(env)
            return out
        return build

    def _ListCons(self, e):
        items = [self.compile(x) for x in e.items]
        return lambda env: [f(env) for f in items]

    def _BagCons(self, e):
        items = [self.compile(x) for x in e.items]
        return lambda env: Bag(f(env) for f in items)

    def _Call(self, e):
        b = lookup(e.name)
        if b is None:
            raise QueryError(f"unknown function {e.name}")
        args = [self.compile(a) for a in e.args]
        ctx = self.ctx
        if len(args) == 1:
            a0 = args[0]
            return lambda env: b.call((a0(env),), ctx.now)
        return lambda env: b.call([a(env) for a in args], ctx.now)

    def _Quantified(self, e):
        binds = [(v, self.compile(x)) for v, x in e.bindings]
        sat = self.compile(e.satisfies)
        some = e.kind == "some"

        def walk(env, i):
            # yields the satisfies value of every binding combination
            if i == len(binds):
                yield sat(env)
                return
            var, f = binds[i]
            for item in iterate(f(env), e.kind):
                inner = dict(env)
                inner[var] = item
                yield from walk(inner, i + 1)

        def quant(env):
            # two-valued: a null "satisfies" counts as not satisfied
            if some:
                return any(r is True for r in walk(env, 0))
            return all(r is True for r in walk(env, 0))
        return quant

    def _Flwor(self, e):
        steps = [self._clause(c) for c in e.clauses]
        ret = self.compile(e.ret)
        ordered = any(isinstance(c, A.OrderByClause) for c in e.clauses)

        def run(env):
            envs = [env]
            for step in steps:
                envs = step(envs, env)
            out = [ret(x) for x in envs]
            return out if ordered else Bag(out)
        return run

    # ---- nested FLWOR clauses: each maps a list of environments to a new list

    def _clause(self, c):
        if isinstance(c, A.ForClause):
            f, var = self.compile(c.expr), c.var

            def for_(envs, base):
                out = []
                for env in envs:
                    for item in iterate(f(env)):
                        n = dict(env)
                        n[var] = item
                        out.append(n)
                return out
            return for_
        if isinstance(c, A.LetClause):
            f, var = self.compile(c.expr), c.var

            def let(envs, base):
                out = []
                for env in envs:
                    n = dict(env)
                    n[var] = f(env)
                    out.append(n)
                return out
            return let
        if isinstance(c, A.WhereClause):
            f = self.compile(c.expr)
            return lambda envs, base: [env for env in envs if ops.truthy(f(env))]
        if isinstance(c, A.GroupByClause):
            keys = [(v, self.compile(x)) for v, x in c.keys]
            withs = c.with_vars

            def group(envs, base):
                groups: dict = {}
                for env in envs:
                    vals = [f(env) for _v, f in keys]
                    g = groups.setdefault(group_key(vals), (vals, []))
                    g[1].append(env)
                out = []
                for vals, members in groups.values():
                    n = dict(base)
                    for (v, _f), x in zip(keys, vals):
                        n[v] = x
                    for w in withs:
                        n[w] = Bag(m[w] for m in members)
                    out.append(n)
                return out
            return group
        if isinstance(c, A.OrderByClause):
            fs = [self.compile(x) for x, _d in c.keys]
            desc = [d for _x, d in c.keys]

            def order(envs, base):
                seen = [None] * len(fs)
                keyed = []
                for env in envs:
                    vals = [f(env) for f in fs]
                    check_order_classes(seen, vals)
                    keyed.append(((order_key(vals, desc), env_key(env)), env))
                keyed.sort(key=lambda kv: kv[0])
                return [env for _k, env in keyed]
            return order
        if isinstance(c, A.LimitClause):
            lim = self.compile(c.limit)
            off = self.compile(c.offset) if c.offset is not None else None

            def limit(envs, base):
                n = limit_value(lim(base), "limit")
                o = limit_value(off(base), "offset") if off else 0
                return envs[o:o + n]
            return limit
        raise QueryError(f"unsupported clause {type(c).__name__}")


def limit_value(v, what: str) -> int:
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise TypeMismatch(f"{what} must be a non-negative integer, got {v!r}")
    return int(v)


# ---- static analysis

def free_vars(e) -> frozenset:
    """Variables an expression reads from its environment."""
    return frozenset(_free(e))


def _free(e):
    if isinstance(e, A.VarRef):
        return {e.name}
    if isinstance(e, A.Quantified):
        out, bound = set(), set()
        for v, x in e.bindings:
            out |= _free(x) - bound
            bound.add(v)
        return out | (_free(e.satisfies) - bound)
    if isinstance(e, A.Flwor):
        out, bound = set(), set()
        for c in e.clauses:
            if isinstance(c, (A.ForClause, A.LetClause)):
                out |= _free(c.expr) - bound
                bound.add(c.var)
            elif isinstance(c, A.GroupByClause):
                for v, x in c.keys:
                    out |= _free(x) - bound
                out |= set(c.with_vars) - bound
                bound |= {v for v, _ in c.keys}
            else:
                for ch in A.children(c):
                    out |= _free(ch) - bound
        return out | (_free(e.ret) - bound)
    out = set()
    for ch in A.children(e):
        out |= _free(ch)
    return out


def reads_datasets(e) -> bool:
    return any(isinstance(n, A.DatasetRef) for n in A.walk(e))


def is_constant(e) -> bool:
    """No free variables: evaluable once per job."""
    return not free_vars(e)

