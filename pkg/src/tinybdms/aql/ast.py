"""AQL syntax tree.

Nodes are frozen dataclasses. ``pos`` (1-based line, column) is carried for
error messages but excluded from equality, so two parses of equivalent text
compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass, replace

from ..adm.types import TypeExpr

_POS = dict(default=(0, 0), compare=False, repr=False)


class Node:
    pass


class Expr(Node):
    pass


@dataclass(frozen=True)
class Hint:
    kind: str  # indexnl | hash | skip-index


@dataclass(frozen=True)
class Literal(Expr):
    value: object
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class VarRef(Expr):
    name: str
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class FieldAccess(Expr):
    expr: Expr
    name: str
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class IndexAccess(Expr):
    expr: Expr
    index: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class QName:
    dataverse: str | None
    name: str

    def __str__(self) -> str:
        return f"{self.dataverse}.{self.name}" if self.dataverse else self.name


@dataclass(frozen=True)
class DatasetRef(Expr):
    qname: QName
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple = ()
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class BinaryOp(Expr):
    op: str
    left: Expr
    right: Expr
    hints: tuple = ()
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class UnaryOp(Expr):
    op: str
    operand: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class FuzzyEq(Expr):
    """``left ~= right`` with the similarity semantics fixed at resolve time."""

    left: Expr
    right: Expr
    simfunction: str
    threshold: object
    hints: tuple = ()
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class Quantified(Expr):
    kind: str  # some | every
    bindings: tuple  # ((var, expr), ...)
    satisfies: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class IfThenElse(Expr):
    cond: Expr
    then: Expr
    other: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class RecordCons(Expr):
    fields: tuple  # ((name, expr), ...)
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class ListCons(Expr):
    items: tuple
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class BagCons(Expr):
    items: tuple
    pos: tuple = field(**_POS)


class Clause(Node):
    pass


@dataclass(frozen=True)
class ForClause(Clause):
    var: str
    expr: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class LetClause(Clause):
    var: str
    expr: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class WhereClause(Clause):
    expr: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class GroupByClause(Clause):
    keys: tuple  # ((var, expr), ...)
    with_vars: tuple
    hints: tuple = ()
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class OrderByClause(Clause):
    keys: tuple  # ((expr, descending), ...)
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class LimitClause(Clause):
    limit: Expr
    offset: Expr | None = None
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class Flwor(Expr):
    clauses: tuple
    ret: Expr
    pos: tuple = field(**_POS)


# ---- statements

class Statement(Node):
    pass


@dataclass(frozen=True)
class QueryStmt(Statement):
    expr: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class SetStmt(Statement):
    name: str
    value: str
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class UseDataverse(Statement):
    name: str
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class CreateDataverse(Statement):
    name: str
    if_not_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class DropDataverse(Statement):
    name: str
    if_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class CreateType(Statement):
    qname: QName
    body: TypeExpr
    if_not_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class DropType(Statement):
    qname: QName
    if_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class CreateDataset(Statement):
    qname: QName
    type_name: QName
    primary_key: tuple = ()  # field paths, each a tuple of names
    external: bool = False
    adaptor: str = ""
    properties: tuple = ()  # ((key, value), ...)
    if_not_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class DropDataset(Statement):
    qname: QName
    if_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class CreateIndex(Statement):
    name: str
    dataset: QName
    fields: tuple  # field paths
    index_type: str = "btree"
    explicit_type: bool = False
    if_not_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class DropIndex(Statement):
    dataset: QName
    name: str
    if_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class CreateFunction(Statement):
    qname: QName
    params: tuple
    body: Expr
    text: str = field(default="", compare=False, repr=False)
    if_not_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class DropFunction(Statement):
    qname: QName
    if_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class CreateFeed(Statement):
    qname: QName
    adaptor: str
    properties: tuple
    function: str | None = None
    if_not_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class DropFeed(Statement):
    qname: QName
    if_exists: bool = False
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class ConnectFeed(Statement):
    feed: QName
    dataset: QName
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class DisconnectFeed(Statement):
    feed: QName
    dataset: QName
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class Insert(Statement):
    dataset: QName
    expr: Expr
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class Delete(Statement):
    var: str
    dataset: QName
    where: Expr | None = None
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class LoadDataset(Statement):
    dataset: QName
    adaptor: str
    properties: tuple
    pos: tuple = field(**_POS)


DDL_TYPES = (CreateDataverse, DropDataverse, CreateType, DropType, CreateDataset, DropDataset, CreateIndex,
             DropIndex, CreateFunction, DropFunction, CreateFeed, DropFeed)


def children(node):
    """Direct child nodes (expressions and clauses) of ``node``."""
    for f in fields(node):
        if f.name == "pos":
            continue
        yield from _nodes_in(getattr(node, f.name))


def _nodes_in(v):
    if isinstance(v, Node):
        yield v
    elif isinstance(v, tuple):
        for x in v:
            yield from _nodes_in(x)


def transform(node, fn):
    """Bottom-up rebuild: children first, then ``fn`` on the rebuilt node."""
    if not is_dataclass(node) or not isinstance(node, Node):
        return node
    changes = {}
    for f in fields(node):
        if f.name == "pos":
            continue
        old = getattr(node, f.name)
        new = _transform_value(old, fn)
        if new is not old:
            changes[f.name] = new
    if changes:
        node = replace(node, **changes)
    return fn(node)


def _transform_value(v, fn):
    if isinstance(v, Node):
        return transform(v, fn)
    if isinstance(v, tuple):
        new = tuple(_transform_value(x, fn) for x in v)
        return v if all(a is b for a, b in zip(new, v)) else new
    return v


def strip_hints(node):
    def drop(n):
        if isinstance(n, (BinaryOp, FuzzyEq, GroupByClause)) and n.hints:
            return replace(n, hints=())
        return n
    return transform(node, drop)


def walk(node):
    """Pre-order iteration over every node."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(list(children(n))))
