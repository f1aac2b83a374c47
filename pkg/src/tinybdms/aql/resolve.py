"""Name resolution for parsed statements.

``resolve_expr`` turns a parsed expression into the form the compiler expects:

* variables are checked against their binding scopes,
* builtin calls are checked for arity, user functions are inlined (their bound
  variables renamed apart so that no capture can happen),
* ``a ~= b`` becomes :class:`FuzzyEq` carrying the session's similarity
  function and threshold,
* dataset names are qualified with the current dataverse.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from ..errors import SemanticError
from ..functions import lookup
from . import ast as A

SIMFUNCTIONS = ("edit-distance", "jaccard")
MAX_INLINE_DEPTH = 32


@dataclass
class SessionConfig:
    simfunction: str = "jaccard"
    simthreshold: float = 0.8
    dataverse: str | None = None

    def copy(self) -> "SessionConfig":
        return replace(self)

    def apply_set(self, name: str, value: str) -> None:
        name = name.lower()
        if name == "simfunction":
            fn = value.strip().lower()
            if fn not in SIMFUNCTIONS:
                raise SemanticError(f"unknown similarity function {value!r}; use one of {', '.join(SIMFUNCTIONS)}")
            # the threshold is checked when a fuzzy comparison uses it, so the two
            # settings can be changed in either order
            self.simfunction = fn
        elif name == "simthreshold":
            try:
                t = float(value)
            except ValueError:
                raise SemanticError(f"simthreshold must be a number, got {value!r}") from None
            self._check(t)
            self.simthreshold = t
        else:
            raise SemanticError(f"unknown setting {name!r}")

    def _check(self, t: float) -> None:
        if t < 0:
            raise SemanticError("simthreshold must be >= 0")
        if self.simfunction == "jaccard" and t > 1:
            raise SemanticError("a jaccard simthreshold must be <= 1")

    def threshold_value(self):
        self._check(self.simthreshold)
        # edit distance thresholds are whole edit counts
        if self.simfunction == "edit-distance":
            return int(self.simthreshold)
        return float(self.simthreshold)


_fresh = itertools.count(1)


def _err(msg: str, node) -> SemanticError:
    line, col = getattr(node, "pos", (0, 0))
    return SemanticError(msg, line, col)


class _Resolver:
    def __init__(self, catalog, session: SessionConfig):
        self.catalog = catalog
        self.session = session

    # scopes are frozensets of variable names
    def expr(self, e: A.Expr, scope: frozenset, dataverse: str | None, depth: int = 0) -> A.Expr:
        r = lambda x, s=scope: self.expr(x, s, dataverse, depth)  # noqa: E731
        if isinstance(e, A.Literal):
            return e
        if isinstance(e, A.VarRef):
            if e.name not in scope:
                raise _err(f"unbound variable ${e.name}", e)
            return e
        if isinstance(e, A.FieldAccess):
            return replace(e, expr=r(e.expr))
        if isinstance(e, A.IndexAccess):
            return replace(e, expr=r(e.expr), index=r(e.index))
        if isinstance(e, A.DatasetRef):
            if e.qname.dataverse is None:
                if dataverse is None:
                    raise _err(f"dataset {e.qname.name} needs a dataverse; issue 'use dataverse' first", e)
                return replace(e, qname=A.QName(dataverse, e.qname.name))
            return e
        if isinstance(e, A.BinaryOp):
            left, right = r(e.left), r(e.right)
            if e.op == "~=":
                return A.FuzzyEq(left, right, self.session.simfunction, self.session.threshold_value(), e.hints,
                                 pos=e.pos)
            return replace(e, left=left, right=right)
        if isinstance(e, A.FuzzyEq):
            return replace(e, left=r(e.left), right=r(e.right))
        if isinstance(e, A.UnaryOp):
            return replace(e, operand=r(e.operand))
        if isinstance(e, A.IfThenElse):
            return replace(e, cond=r(e.cond), then=r(e.then), other=r(e.other))
        if isinstance(e, A.RecordCons):
            return replace(e, fields=tuple((k, r(v)) for k, v in e.fields))
        if isinstance(e, A.ListCons):
            return replace(e, items=tuple(r(x) for x in e.items))
        if isinstance(e, A.BagCons):
            return replace(e, items=tuple(r(x) for x in e.items))
        if isinstance(e, A.Quantified):
            binds = []
            inner = scope
            for v, x in e.bindings:
                binds.append((v, r(x, inner)))
                inner = inner | {v}
            return replace(e, bindings=tuple(binds), satisfies=r(e.satisfies, inner))
        if isinstance(e, A.Flwor):
            return self.flwor(e, scope, dataverse, depth)
        if isinstance(e, A.Call):
            return self.call(e, scope, dataverse, depth)
        raise _err(f"unsupported expression {type(e).__name__}", e)

    def flwor(self, e: A.Flwor, outer: frozenset, dataverse, depth) -> A.Flwor:
        scope = outer
        out = []
        for c in e.clauses:
            if isinstance(c, (A.ForClause, A.LetClause)):
                out.append(replace(c, expr=self.expr(c.expr, scope, dataverse, depth)))
                scope = scope | {c.var}
            elif isinstance(c, A.WhereClause):
                out.append(replace(c, expr=self.expr(c.expr, scope, dataverse, depth)))
            elif isinstance(c, A.GroupByClause):
                keys = tuple((v, self.expr(x, scope, dataverse, depth)) for v, x in c.keys)
                for w in c.with_vars:
                    if w not in scope:
                        raise _err(f"unbound variable ${w} in group by ... with", c)
                out.append(replace(c, keys=keys))
                # only the keys and the regrouped variables survive grouping
                scope = outer | {v for v, _ in c.keys} | set(c.with_vars)
            elif isinstance(c, A.OrderByClause):
                out.append(replace(c, keys=tuple((self.expr(x, scope, dataverse, depth), d) for x, d in c.keys)))
            elif isinstance(c, A.LimitClause):
                off = self.expr(c.offset, scope, dataverse, depth) if c.offset is not None else None
                out.append(replace(c, limit=self.expr(c.limit, scope, dataverse, depth), offset=off))
            else:
                raise _err(f"unsupported clause {type(c).__name__}", c)
        return replace(e, clauses=tuple(out), ret=self.expr(e.ret, scope, dataverse, depth))

    def call(self, e: A.Call, scope, dataverse, depth) -> A.Expr:
        args = tuple(self.expr(a, scope, dataverse, depth) for a in e.args)
        b = lookup(e.name)
        if b is not None:
            b.check_arity(len(args), *e.pos)
            return replace(e, args=args)
        fn = self.catalog.lookup_function(dataverse, e.name) if (self.catalog is not None and dataverse) else None
        if fn is None:
            raise _err(f"unknown function {e.name}/{len(args)}", e)
        if len(fn.params) != len(args):
            raise _err(f"function {e.name} expects {len(fn.params)} argument(s), got {len(args)}", e)
        if depth >= MAX_INLINE_DEPTH:
            raise _err(f"function {e.name} is (mutually) recursive", e)
        body = rename_apart(fn.body, fn.params)
        body = self.expr(body, frozenset(fn.params), fn.dataverse, depth + 1)
        return substitute(body, dict(zip(fn.params, args)))


def rename_apart(e: A.Expr, params) -> A.Expr:
    """Give every variable bound inside ``e`` a fresh name (params are kept)."""
    tag = next(_fresh)
    params = set(params)

    def fresh(v: str) -> str:
        return v if v in params else f"{v}#{tag}"

    def fn(n):
        if isinstance(n, A.VarRef) and n.name not in params:
            return replace(n, name=fresh(n.name))
        if isinstance(n, (A.ForClause, A.LetClause)):
            return replace(n, var=fresh(n.var))
        if isinstance(n, A.GroupByClause):
            return replace(n, keys=tuple((fresh(v), x) for v, x in n.keys),
                           with_vars=tuple(fresh(v) for v in n.with_vars))
        if isinstance(n, A.Quantified):
            return replace(n, bindings=tuple((fresh(v), x) for v, x in n.bindings))
        return n

    return A.transform(e, fn)


def substitute(e: A.Expr, mapping: dict) -> A.Expr:
    """Replace free references to the given variables with expressions."""
    if not mapping:
        return e
    return A.transform(e, lambda n: mapping.get(n.name, n) if isinstance(n, A.VarRef) else n)


def resolve_expr(e: A.Expr, catalog, session: SessionConfig, scope=()) -> A.Expr:
    return _Resolver(catalog, session).expr(e, frozenset(scope), session.dataverse)


def check_function_body(body: A.Expr, params, catalog, session: SessionConfig) -> A.Expr:
    """Validate a function body at definition time; returns it resolved."""
    return resolve_expr(body, catalog, session, params)
