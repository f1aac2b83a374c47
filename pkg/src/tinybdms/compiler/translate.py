"""AST to direct (unoptimized) plan.

The direct plan reads every dataset with a full scan, joins successive
``for`` clauses with nested-loop joins, and keeps every ``where`` as a select
at the position it was written. Correlated subqueries stay inside expressions
and are evaluated per tuple.
"""

from __future__ import annotations

import itertools

from ..aql import ast as A
from ..errors import SemanticError
from ..functions.aggregates import is_aggregate
from . import plan as P
from .expr import free_vars


def _err(msg: str, node) -> SemanticError:
    line, col = getattr(node, "pos", (0, 0))
    return SemanticError(msg, line, col)


class Translator:
    def __init__(self, catalog):
        self.catalog = catalog
        self._ids = itertools.count(1)

    def fresh(self, base: str) -> str:
        return f"#{base}{next(self._ids)}"

    def dataset(self, qname: A.QName, node):
        d = self.catalog.dataset(qname.dataverse, qname.name)
        if d is None:
            raise _err(f"unknown dataset {qname}", node)
        return d

    # ---- queries

    def query(self, e: A.Expr) -> P.Op:
        if isinstance(e, A.Flwor):
            cur = self.clauses(e.clauses)
            ordered = any(isinstance(c, A.OrderByClause) for c in e.clauses)
            return P.Result(e.ret, ordered, inputs=[cur])
        if isinstance(e, A.Call) and is_aggregate(e.name) and len(e.args) == 1 \
                and isinstance(e.args[0], A.Flwor) and not free_vars(e.args[0]):
            f = e.args[0]
            var = self.fresh("agg")
            agg = P.Aggregate(var, e.name, f.ret, inputs=[self.clauses(f.clauses)])
            return P.Result(A.VarRef(var), inputs=[agg])
        return P.Result(e, inputs=[P.EmptySource()])

    def clauses(self, clauses) -> P.Op:
        cur: P.Op = P.EmptySource()
        rows = False  # whether a for clause has produced rows yet
        for c in clauses:
            if isinstance(c, A.ForClause):
                src = self.source(c)
                if src is None:
                    cur = P.Unnest(c.var, c.expr, inputs=[cur])
                elif not rows:
                    cur = _restack(cur, src)
                else:
                    cur = P.Join(inputs=[cur, src])
                rows = True
            elif isinstance(c, A.LetClause):
                cur = P.Assign(c.var, c.expr, inputs=[cur])
            elif isinstance(c, A.WhereClause):
                cur = P.Select(c.expr, inputs=[cur])
            elif isinstance(c, A.GroupByClause):
                cur = P.Group(c.keys, c.with_vars, inputs=[cur])
            elif isinstance(c, A.OrderByClause):
                cur = P.Sort(c.keys, inputs=[cur])
            elif isinstance(c, A.LimitClause):
                cur = P.Limit(c.limit, c.offset, inputs=[cur])
            else:
                raise _err(f"unsupported clause {type(c).__name__}", c)
        return cur

    def source(self, c: A.ForClause) -> P.Op | None:
        """A plan producing ``c.var`` on its own, or ``None`` if the clause
        iterates over a value computed from the current tuple."""
        if isinstance(c.expr, A.DatasetRef):
            return P.DataScan(c.var, self.dataset(c.expr.qname, c.expr))
        if isinstance(c.expr, A.Flwor) and not free_vars(c.expr):
            # an uncorrelated subquery (e.g. an inlined function body) becomes
            # part of the plan, so its scans are open to index selection
            return P.Assign(c.var, c.expr.ret, inputs=[self.clauses(c.expr.clauses)])
        return None

    # ---- updates

    def _writable(self, s):
        d = self.dataset(s.dataset, s)
        if d.dataverse == "Metadata":
            raise _err(f"{d.qualified} is maintained by DDL statements only", s)
        return d

    def insert(self, s: A.Insert) -> P.Op:
        d = self._writable(s)
        if not d.internal:
            raise _err(f"cannot insert into external dataset {d.qualified}", s)
        var = self.fresh("rec")
        e = s.expr
        if isinstance(e, A.Flwor):
            cur = P.Assign(var, e.ret, inputs=[self.clauses(e.clauses)])
        else:
            coll = e if isinstance(e, (A.ListCons, A.BagCons)) else A.ListCons((e,))
            cur = P.Unnest(var, coll, inputs=[P.EmptySource()])
        return P.InsertSink(d, var, inputs=[cur])

    def delete(self, s: A.Delete) -> P.Op:
        d = self._writable(s)
        if not d.internal:
            raise _err(f"cannot delete from external dataset {d.qualified}", s)
        cur: P.Op = P.DataScan(s.var, d)
        if s.where is not None:
            cur = P.Select(s.where, inputs=[cur])
        return P.DeleteSink(d, s.var, inputs=[cur])


def _restack(chain: P.Op, src: P.Op) -> P.Op:
    """Rebuild the row-free prefix ``chain`` (lets and wheres over the empty
    source) on top of ``src``. Those operators do not read the new variable,
    so applying them per row is equivalent."""
    ops = []
    while not isinstance(chain, P.EmptySource):
        ops.append(chain)
        chain = chain.inputs[0]
    cur = src
    for op in reversed(ops):
        op.inputs = [cur]
        cur = op
    return cur
