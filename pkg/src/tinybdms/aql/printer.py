"""AQL pretty printer. ``parse(print_statement(s))`` reproduces ``s``."""

from __future__ import annotations

import json
import math
import re

from ..adm.text import print_adm
from ..adm.types import print_type
from ..adm.values import INT32_MAX, Int64
from . import ast as A

_BARE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z_][A-Za-z0-9_]*)*\Z")
_COMPOUND = (A.BinaryOp, A.FuzzyEq, A.Quantified, A.Flwor, A.IfThenElse, A.UnaryOp)


def _s(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)


def _name(text: str) -> str:
    return text if _BARE.match(text) else _s(text)


def _hints(hints) -> str:
    return "".join(f"/*+ {h.kind} */ " for h in hints)


def _literal(v) -> str:
    if isinstance(v, Int64):
        return str(int(v)) if v > INT32_MAX else f'int64("{int(v)}")'
    if isinstance(v, float) and math.isfinite(v):
        return repr(v)
    return print_adm(v)


def _sub(e: A.Expr, ind: int) -> str:
    text = print_expr(e, ind)
    return f"({text})" if isinstance(e, _COMPOUND) else text


def _base(e: A.Expr, ind: int) -> str:
    # operand of a postfix . or [ ]
    text = print_expr(e, ind)
    return f"({text})" if isinstance(e, _COMPOUND + (A.DatasetRef,)) else text


def print_expr(e: A.Expr, ind: int = 0) -> str:
    pad = "  " * ind
    if isinstance(e, A.Literal):
        return _literal(e.value)
    if isinstance(e, A.VarRef):
        return "$" + e.name
    if isinstance(e, A.FieldAccess):
        return f"{_base(e.expr, ind)}.{_name(e.name)}"
    if isinstance(e, A.IndexAccess):
        return f"{_base(e.expr, ind)}[{print_expr(e.index, ind)}]"
    if isinstance(e, A.DatasetRef):
        return f"dataset {e.qname}"
    if isinstance(e, A.Call):
        return f"{e.name}(" + ", ".join(print_expr(a, ind) for a in e.args) + ")"
    if isinstance(e, A.BinaryOp):
        return f"{_sub(e.left, ind)} {_hints(e.hints)}{e.op} {_sub(e.right, ind)}"
    if isinstance(e, A.FuzzyEq):
        return f"{_sub(e.left, ind)} {_hints(e.hints)}~= {_sub(e.right, ind)}"
    if isinstance(e, A.UnaryOp):
        return f"{e.op}{_sub(e.operand, ind)}"
    if isinstance(e, A.Quantified):
        binds = ", ".join(f"${v} in {_sub(x, ind)}" for v, x in e.bindings)
        return f"{e.kind} {binds} satisfies {print_expr(e.satisfies, ind)}"
    if isinstance(e, A.IfThenElse):
        return f"if ({print_expr(e.cond, ind)}) then {_sub(e.then, ind)} else {print_expr(e.other, ind)}"
    if isinstance(e, A.RecordCons):
        if not e.fields:
            return "{ }"
        inner = ",\n".join(f"{pad}  {_s(k)}: {print_expr(v, ind + 1)}" for k, v in e.fields)
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(e, A.ListCons):
        return "[" + ", ".join(print_expr(x, ind) for x in e.items) + "]"
    if isinstance(e, A.BagCons):
        return "{{ " + ", ".join(print_expr(x, ind) for x in e.items) + " }}" if e.items else "{{ }}"
    if isinstance(e, A.Flwor):
        lines = [_clause(c, ind) for c in e.clauses]
        lines.append("return " + print_expr(e.ret, ind + 1))
        return ("\n" + pad).join(lines)
    raise TypeError(f"cannot print {type(e).__name__}")


def _clause(c: A.Clause, ind: int) -> str:
    if isinstance(c, A.ForClause):
        return f"for ${c.var} in {_sub(c.expr, ind + 1)}"
    if isinstance(c, A.LetClause):
        return f"let ${c.var} := {_sub(c.expr, ind + 1)}"
    if isinstance(c, A.WhereClause):
        return "where " + print_expr(c.expr, ind + 1)
    if isinstance(c, A.GroupByClause):
        keys = ", ".join(f"${v} := {_sub(x, ind + 1)}" for v, x in c.keys)
        withs = (" with " + ", ".join("$" + w for w in c.with_vars)) if c.with_vars else ""
        return f"group {_hints(c.hints)}by {keys}{withs}"
    if isinstance(c, A.OrderByClause):
        return "order by " + ", ".join(_sub(x, ind + 1) + (" desc" if d else "") for x, d in c.keys)
    if isinstance(c, A.LimitClause):
        off = f" offset {_sub(c.offset, ind + 1)}" if c.offset is not None else ""
        return f"limit {_sub(c.limit, ind + 1)}{off}"
    raise TypeError(f"cannot print {type(c).__name__}")


def _props(props) -> str:
    return "(" + ", ".join(f"({_s(k)}={_s(v)})" for k, v in props) + ")"


def _path(p) -> str:
    return ".".join(_name(x) for x in p)


def print_statement(s: A.Statement) -> str:
    if isinstance(s, A.QueryStmt):
        return print_expr(s.expr) + ";"
    if isinstance(s, A.SetStmt):
        return f"set {s.name} {_s(s.value)};"
    if isinstance(s, A.UseDataverse):
        return f"use dataverse {s.name};"
    if isinstance(s, A.CreateDataverse):
        return f"create dataverse {s.name}{' if not exists' if s.if_not_exists else ''};"
    if isinstance(s, A.DropDataverse):
        return f"drop dataverse {s.name}{' if exists' if s.if_exists else ''};"
    if isinstance(s, A.CreateType):
        ine = " if not exists" if s.if_not_exists else ""
        return f"create type {s.qname}{ine} as {print_type(s.body)};"
    if isinstance(s, A.DropType):
        return f"drop type {s.qname}{' if exists' if s.if_exists else ''};"
    if isinstance(s, A.CreateDataset):
        ine = " if not exists" if s.if_not_exists else ""
        if s.external:
            return f"create external dataset {s.qname}({s.type_name}){ine} using {s.adaptor} {_props(s.properties)};"
        keys = ", ".join(_path(p) for p in s.primary_key)
        return f"create dataset {s.qname}({s.type_name}){ine} primary key {keys};"
    if isinstance(s, A.DropDataset):
        return f"drop dataset {s.qname}{' if exists' if s.if_exists else ''};"
    if isinstance(s, A.CreateIndex):
        ine = " if not exists" if s.if_not_exists else ""
        fields = ", ".join(_path(p) for p in s.fields)
        typ = f" type {s.index_type}" if s.explicit_type else ""
        return f"create index {s.name}{ine} on {s.dataset}({fields}){typ};"
    if isinstance(s, A.DropIndex):
        return f"drop index {s.dataset}.{s.name}{' if exists' if s.if_exists else ''};"
    if isinstance(s, A.CreateFunction):
        params = ", ".join("$" + p for p in s.params)
        ine = " if not exists" if s.if_not_exists else ""
        return f"create function {s.qname}{ine}({params}) {{\n  {print_expr(s.body, 1)}\n}};"
    if isinstance(s, A.DropFunction):
        return f"drop function {s.qname}{' if exists' if s.if_exists else ''};"
    if isinstance(s, A.CreateFeed):
        ine = " if not exists" if s.if_not_exists else ""
        fn = f" apply function {s.function}" if s.function else ""
        return f"create feed {s.qname}{ine} using {s.adaptor} {_props(s.properties)}{fn};"
    if isinstance(s, A.DropFeed):
        return f"drop feed {s.qname}{' if exists' if s.if_exists else ''};"
    if isinstance(s, A.ConnectFeed):
        return f"connect feed {s.feed} to dataset {s.dataset};"
    if isinstance(s, A.DisconnectFeed):
        return f"disconnect feed {s.feed} from dataset {s.dataset};"
    if isinstance(s, A.Insert):
        return f"insert into dataset {s.dataset} ({print_expr(s.expr, 1)});"
    if isinstance(s, A.Delete):
        where = f" where {print_expr(s.where)}" if s.where is not None else ""
        return f"delete ${s.var} from dataset {s.dataset}{where};"
    if isinstance(s, A.LoadDataset):
        return f"load dataset {s.dataset} using {s.adaptor} {_props(s.properties)};"
    raise TypeError(f"cannot print {type(s).__name__}")


def print_statements(stmts) -> str:
    return "\n\n".join(print_statement(s) for s in stmts) + "\n"
