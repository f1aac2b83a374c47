"""Recursive-descent parser for the supported AQL subset.

Operator precedence, loosest first::

    for/let FLWOR, some/every, if-then-else   (extend as far right as possible)
    or
    and
    =  !=  <  <=  >  >=  ~=                   (non-associative)
    +  -
    *  /  %  mod
    unary + -
    postfix .field  [index]

Statements may be separated by ``;``; the separator is optional where the
statement end is unambiguous (the ``create type`` examples omit it).
"""

from __future__ import annotations

from ..adm.text import unescape
from ..adm.types import BagType, FieldDef, ListType, RecordType, TypeRef
from ..adm.values import INT32_MAX, Int64
from ..errors import AqlSyntaxError
from . import ast as A
from .lexer import Token, tokenize

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=", "~=")
KNOWN_HINTS = {"indexnl": "indexnl", "hash": "hash", "hash-groupby": "hash", "skip-index": "skip-index"}
INDEX_TYPES = ("btree", "rtree", "keyword")


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    # ---- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None, expected=()) -> AqlSyntaxError:
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        if expected:
            msg = f"{msg}; expected {' or '.join(sorted(expected))}, found {found}"
        return AqlSyntaxError(msg, t.line, t.col, expected)

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def at_kw(self, *words: str) -> bool:
        return self.tok.kind == "ident" and self.tok.text.lower() in words

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            raise self.error("syntax error", expected=[repr(op)])
        return self.advance()

    def expect_kw(self, *words: str) -> Token:
        if not self.at_kw(*words):
            raise self.error("syntax error", expected=[repr(w) for w in words])
        return self.advance()

    def accept_op(self, op: str) -> bool:
        if self.at_op(op):
            self.advance()
            return True
        return False

    def accept_kw(self, word: str) -> bool:
        if self.at_kw(word):
            self.advance()
            return True
        return False

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            raise self.error("syntax error", expected=[what])
        return self.advance().text

    def var(self) -> str:
        if self.tok.kind != "var":
            raise self.error("syntax error", expected=["variable"])
        return self.advance().text[1:]

    def string(self) -> str:
        if self.tok.kind != "string":
            raise self.error("syntax error", expected=["string literal"])
        t = self.advance()
        try:
            return unescape(t.text[1:-1])
        except ValueError as e:
            raise self.error(str(e), t) from None

    def qname(self) -> A.QName:
        first = self.ident("name")
        if self.at_op(".") and self.peek().kind == "ident":
            self.advance()
            return A.QName(first, self.advance().text)
        return A.QName(None, first)

    def _hints(self, tok: Token) -> tuple:
        return tuple(A.Hint(KNOWN_HINTS[h]) for h in tok.hints if h in KNOWN_HINTS)

    def _adjacent(self, a: Token, b: Token) -> bool:
        return a.end == b.start

    def at_bag_open(self) -> bool:
        return self.at_op("{") and self.peek().kind == "op" and self.peek().text == "{" \
            and self._adjacent(self.tok, self.peek())

    def at_bag_close(self) -> bool:
        return self.at_op("}") and self.peek().kind == "op" and self.peek().text == "}" \
            and self._adjacent(self.tok, self.peek())

    # ---- statements

    def parse_statements(self) -> list[A.Statement]:
        out = []
        while True:
            while self.accept_op(";"):
                pass
            if self.tok.kind == "eof":
                return out
            out.append(self.statement())
            if self.tok.kind != "eof" and not self.at_op(";") and not self._statement_start():
                raise self.error("syntax error", expected=["';'", "end of input"])

    def _statement_start(self) -> bool:
        return self.at_kw("create", "drop", "use", "set", "insert", "delete", "load", "connect", "disconnect")

    def statement(self) -> A.Statement:
        t = self.tok
        pos = (t.line, t.col)
        if self.at_kw("create"):
            return self.create()
        if self.at_kw("drop"):
            return self.drop()
        if self.at_kw("use"):
            self.advance()
            self.expect_kw("dataverse")
            return A.UseDataverse(self.ident("dataverse name"), pos=pos)
        if self.at_kw("set") and self.peek().kind == "ident":
            self.advance()
            name = self.ident("parameter name")
            return A.SetStmt(name, self.string(), pos=pos)
        if self.at_kw("insert") and self.peek().kind == "ident" and self.peek().text == "into":
            self.advance()
            self.advance()
            self.expect_kw("dataset")
            ds = self.qname()
            return A.Insert(ds, self.expr(), pos=pos)
        if self.at_kw("delete") and self.peek().kind == "var":
            self.advance()
            v = self.var()
            self.expect_kw("from")
            self.expect_kw("dataset")
            ds = self.qname()
            where = self.expr() if self.accept_kw("where") else None
            return A.Delete(v, ds, where, pos=pos)
        if self.at_kw("load") and self.peek().kind == "ident" and self.peek().text == "dataset":
            self.advance()
            self.advance()
            ds = self.qname()
            self.expect_kw("using")
            adaptor = self.ident("adaptor name")
            return A.LoadDataset(ds, adaptor, self.properties(), pos=pos)
        if self.at_kw("connect", "disconnect") and self.peek().kind == "ident" and self.peek().text == "feed":
            connect = self.advance().text.lower() == "connect"
            self.advance()
            feed = self.qname()
            self.expect_kw("to" if connect else "from")
            self.expect_kw("dataset")
            ds = self.qname()
            return (A.ConnectFeed if connect else A.DisconnectFeed)(feed, ds, pos=pos)
        return A.QueryStmt(self.expr(), pos=pos)

    def _if_not_exists(self) -> bool:
        if self.at_kw("if") and self.peek().text == "not":
            self.advance()
            self.advance()
            self.expect_kw("exists")
            return True
        return False

    def _if_exists(self) -> bool:
        if self.at_kw("if") and self.peek().text == "exists":
            self.advance()
            self.advance()
            return True
        return False

    def create(self) -> A.Statement:
        start = self.advance()
        pos = (start.line, start.col)
        if self.accept_kw("dataverse"):
            name = self.ident("dataverse name")
            return A.CreateDataverse(name, self._if_not_exists(), pos=pos)
        if self.accept_kw("type"):
            qn = self.qname()
            ine = self._if_not_exists()
            self.expect_kw("as")
            return A.CreateType(qn, self.type_body(), ine, pos=pos)
        external = self.accept_kw("external")
        if self.accept_kw("dataset"):
            qn = self.qname()
            self.expect_op("(")
            tn = self.qname()
            self.expect_op(")")
            ine = self._if_not_exists()
            if external:
                self.expect_kw("using")
                adaptor = self.ident("adaptor name")
                return A.CreateDataset(qn, tn, (), True, adaptor, self.properties(), ine, pos=pos)
            self.expect_kw("primary")
            self.expect_kw("key")
            keys = [self.field_path()]
            while self.accept_op(","):
                keys.append(self.field_path())
            return A.CreateDataset(qn, tn, tuple(keys), if_not_exists=ine, pos=pos)
        if external:
            raise self.error("syntax error", expected=["'dataset'"])
        if self.accept_kw("index"):
            name = self.ident("index name")
            ine = self._if_not_exists()
            self.expect_kw("on")
            ds = self.qname()
            self.expect_op("(")
            paths = [self.field_path()]
            while self.accept_op(","):
                paths.append(self.field_path())
            self.expect_op(")")
            itype, explicit = "btree", False
            if self.accept_kw("type"):
                t = self.tok
                itype = self.ident("index type").lower()
                if itype not in INDEX_TYPES:
                    raise self.error(f"unsupported index type {itype!r}", t, [repr(x) for x in INDEX_TYPES])
                explicit = True
            return A.CreateIndex(name, ds, tuple(paths), itype, explicit, ine, pos=pos)
        if self.accept_kw("function"):
            qn = self.qname()
            ine = self._if_not_exists()
            self.expect_op("(")
            params = []
            if not self.at_op(")"):
                params.append(self.var())
                while self.accept_op(","):
                    params.append(self.var())
            self.expect_op(")")
            open_brace = self.expect_op("{")
            body = self.expr()
            close = self.expect_op("}")
            text = self.text[open_brace.end:close.start].strip()
            return A.CreateFunction(qn, tuple(params), body, text, ine, pos=pos)
        if self.accept_kw("feed"):
            qn = self.qname()
            ine = self._if_not_exists()
            self.expect_kw("using")
            adaptor = self.ident("adaptor name")
            props = self.properties()
            fn = None
            if self.accept_kw("apply"):
                self.expect_kw("function")
                fn = self.ident("function name")
            return A.CreateFeed(qn, adaptor, props, fn, ine, pos=pos)
        raise self.error("syntax error", expected=["'dataverse'", "'type'", "'dataset'", "'external'", "'index'",
                                                   "'function'", "'feed'"])

    def drop(self) -> A.Statement:
        start = self.advance()
        pos = (start.line, start.col)
        if self.accept_kw("dataverse"):
            name = self.ident("dataverse name")
            return A.DropDataverse(name, self._if_exists(), pos=pos)
        if self.accept_kw("type"):
            qn = self.qname()
            return A.DropType(qn, self._if_exists(), pos=pos)
        if self.accept_kw("dataset"):
            qn = self.qname()
            return A.DropDataset(qn, self._if_exists(), pos=pos)
        if self.accept_kw("index"):
            ds = self.ident("dataset name")
            self.expect_op(".")
            name = self.ident("index name")
            return A.DropIndex(A.QName(None, ds), name, self._if_exists(), pos=pos)
        if self.accept_kw("function"):
            qn = self.qname()
            if self.accept_op("@"):
                if self.tok.kind != "int":
                    raise self.error("syntax error", expected=["arity"])
                self.advance()
            return A.DropFunction(qn, self._if_exists(), pos=pos)
        if self.accept_kw("feed"):
            qn = self.qname()
            return A.DropFeed(qn, self._if_exists(), pos=pos)
        raise self.error("syntax error", expected=["'dataverse'", "'type'", "'dataset'", "'index'", "'function'",
                                                   "'feed'"])

    def field_path(self) -> tuple:
        parts = [self.field_name()]
        while self.at_op(".") and self.peek().kind in ("ident", "string"):
            self.advance()
            parts.append(self.field_name())
        return tuple(parts)

    def field_name(self) -> str:
        if self.tok.kind == "string":
            return self.string()
        return self.ident("field name")

    def properties(self) -> tuple:
        """``(("k"="v"), ("k2"="v2"))``"""
        self.expect_op("(")
        props = []
        if not self.at_op(")"):
            while True:
                self.expect_op("(")
                k = self.string()
                self.expect_op("=")
                v = self.string()
                self.expect_op(")")
                props.append((k, v))
                if not self.accept_op(","):
                    break
        self.expect_op(")")
        return tuple(props)

    # ---- type bodies

    def type_body(self):
        if self.at_kw("open", "closed"):
            is_open = self.advance().text.lower() == "open"
            return self.record_type(is_open)
        if self.at_op("{") and not self.at_bag_open():
            return self.record_type(True)
        return self.type_expr()

    def type_expr(self):
        if self.at_bag_open():
            self.advance()
            self.advance()
            item = self.type_expr()
            if not self.at_bag_close():
                raise self.error("syntax error", expected=["'}}'"])
            self.advance()
            self.advance()
            return BagType(item)
        if self.accept_op("["):
            item = self.type_expr()
            self.expect_op("]")
            return ListType(item)
        if self.at_op("{") or self.at_kw("open", "closed"):
            return self.type_body()
        return TypeRef(self.ident("type name"))

    def record_type(self, is_open: bool) -> RecordType:
        self.expect_op("{")
        fields = []
        seen = set()
        if not self.at_op("}"):
            while True:
                t = self.tok
                name = self.field_name()
                if name in seen:
                    raise self.error(f"duplicate field {name!r} in type", t)
                seen.add(name)
                self.expect_op(":")
                ftype = self.type_expr()
                optional = self.accept_op("?")
                fields.append(FieldDef(name, ftype, optional))
                if not self.accept_op(","):
                    break
        self.expect_op("}")
        return RecordType(tuple(fields), is_open)

    # ---- expressions

    def expr(self) -> A.Expr:
        return self.or_expr()

    def or_expr(self) -> A.Expr:
        left = self.and_expr()
        while self.at_kw("or"):
            t = self.advance()
            left = A.BinaryOp("or", left, self.and_expr(), pos=(t.line, t.col))
        return left

    def and_expr(self) -> A.Expr:
        left = self.cmp_expr()
        while self.at_kw("and"):
            t = self.advance()
            left = A.BinaryOp("and", left, self.cmp_expr(), pos=(t.line, t.col))
        return left

    def cmp_expr(self) -> A.Expr:
        left = self.add_expr()
        if self.at_op(*COMPARISON_OPS):
            t = self.advance()
            right = self.add_expr()
            left = A.BinaryOp(t.text, left, right, self._hints(t), pos=(t.line, t.col))
            if self.at_op(*COMPARISON_OPS):
                raise self.error("comparison operators do not chain; add parentheses")
        return left

    def add_expr(self) -> A.Expr:
        left = self.mul_expr()
        while self.at_op("+", "-"):
            t = self.advance()
            left = A.BinaryOp(t.text, left, self.mul_expr(), pos=(t.line, t.col))
        return left

    def mul_expr(self) -> A.Expr:
        left = self.unary_expr()
        while self.at_op("*", "/", "%") or self.at_kw("mod"):
            t = self.advance()
            op = "%" if t.text.lower() == "mod" else t.text
            left = A.BinaryOp(op, left, self.unary_expr(), pos=(t.line, t.col))
        return left

    def unary_expr(self) -> A.Expr:
        if self.at_op("-", "+"):
            t = self.advance()
            return A.UnaryOp(t.text, self.unary_expr(), pos=(t.line, t.col))
        return self.postfix_expr()

    def postfix_expr(self) -> A.Expr:
        e = self.primary()
        while True:
            if self.at_op("."):
                t = self.advance()
                if self.tok.kind not in ("ident", "string"):
                    raise self.error("syntax error", expected=["field name"])
                e = A.FieldAccess(e, self.field_name(), pos=(t.line, t.col))
            elif self.at_op("["):
                t = self.advance()
                idx = self.expr()
                self.expect_op("]")
                e = A.IndexAccess(e, idx, pos=(t.line, t.col))
            else:
                return e

    def primary(self) -> A.Expr:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "int":
            self.advance()
            n = int(t.text)
            if n <= INT32_MAX:
                return A.Literal(n, pos=pos)
            # the unary minus that may precede us is applied by folding later
            return A.Literal(Int64(n), pos=pos)
        if t.kind == "double":
            self.advance()
            return A.Literal(float(t.text), pos=pos)
        if t.kind == "string":
            return A.Literal(self.string(), pos=pos)
        if t.kind == "var":
            self.advance()
            return A.VarRef(t.text[1:], pos=pos)
        if t.kind == "op":
            if t.text == "(":
                self.advance()
                e = self.expr()
                self.expect_op(")")
                return e
            if t.text == "[":
                self.advance()
                return A.ListCons(self.items("]"), pos=pos)
            if self.at_bag_open():
                self.advance()
                self.advance()
                items = []
                if not self.at_bag_close():
                    items.append(self.expr())
                    while self.accept_op(","):
                        items.append(self.expr())
                if not self.at_bag_close():
                    raise self.error("syntax error", expected=["'}}'", "','"])
                self.advance()
                self.advance()
                return A.BagCons(tuple(items), pos=pos)
            if t.text == "{":
                return self.record_cons()
        if t.kind == "ident":
            word = t.text.lower()
            if word in ("for", "let") and self.peek().kind == "var":
                return self.flwor()
            if word in ("some", "every") and self.peek().kind == "var":
                return self.quantified()
            if word == "if" and self.peek().kind == "op" and self.peek().text == "(":
                return self.if_expr()
            if word == "dataset" and self.peek().kind == "ident":
                self.advance()
                return A.DatasetRef(self.qname(), pos=pos)
            if word in ("true", "false"):
                self.advance()
                return A.Literal(word == "true", pos=pos)
            if word == "null":
                self.advance()
                return A.Literal(None, pos=pos)
            if self.peek().kind == "op" and self.peek().text == "(":
                name = self.advance().text
                self.advance()
                return A.Call(name, self.items(")"), pos=pos)
        raise self.error("syntax error", expected=["expression"])

    def items(self, close: str) -> tuple:
        items = []
        if not self.at_op(close):
            items.append(self.expr())
            while self.accept_op(","):
                items.append(self.expr())
        self.expect_op(close)
        return tuple(items)

    def record_cons(self) -> A.RecordCons:
        t = self.expect_op("{")
        fields = []
        seen = set()
        if not self.at_op("}"):
            while True:
                nt = self.tok
                if nt.kind != "string":
                    raise self.error("syntax error", expected=["quoted field name"])
                name = self.string()
                if name in seen:
                    raise self.error(f"duplicate field {name!r} in record constructor", nt)
                seen.add(name)
                self.expect_op(":")
                fields.append((name, self.expr()))
                if not self.accept_op(","):
                    break
        self.expect_op("}")
        return A.RecordCons(tuple(fields), pos=(t.line, t.col))

    def quantified(self) -> A.Quantified:
        t = self.advance()
        bindings = []
        names = set()
        while True:
            v = self._fresh_var(names)
            self.expect_kw("in")
            bindings.append((v, self.expr()))
            if not self.accept_op(","):
                break
        self.expect_kw("satisfies")
        return A.Quantified(t.text.lower(), tuple(bindings), self.expr(), pos=(t.line, t.col))

    def if_expr(self) -> A.IfThenElse:
        t = self.advance()
        self.expect_op("(")
        cond = self.expr()
        self.expect_op(")")
        self.expect_kw("then")
        then = self.expr()
        self.expect_kw("else")
        return A.IfThenElse(cond, then, self.expr(), pos=(t.line, t.col))

    def _fresh_var(self, names: set) -> str:
        vt = self.tok
        v = self.var()
        if v in names:
            raise self.error(f"duplicate variable ${v} in one clause", vt)
        names.add(v)
        return v

    def flwor(self) -> A.Flwor:
        start = self.tok
        clauses = []
        while True:
            t = self.tok
            pos = (t.line, t.col)
            if self.at_kw("for") and self.peek().kind == "var":
                self.advance()
                names = set()
                while True:
                    v = self._fresh_var(names)
                    self.expect_kw("in")
                    clauses.append(A.ForClause(v, self.expr(), pos=pos))
                    if not self.accept_op(","):
                        break
            elif self.at_kw("let") and self.peek().kind == "var":
                self.advance()
                names = set()
                while True:
                    v = self._fresh_var(names)
                    self.expect_op(":=")
                    clauses.append(A.LetClause(v, self.expr(), pos=pos))
                    if not self.accept_op(","):
                        break
            elif self.at_kw("where"):
                self.advance()
                clauses.append(A.WhereClause(self.expr(), pos=pos))
            elif self.at_kw("group"):
                hints = self._hints(self.advance())
                by = self.expect_kw("by")
                hints += self._hints(by)
                keys = []
                names = set()
                while True:
                    v = self._fresh_var(names)
                    self.expect_op(":=")
                    keys.append((v, self.expr()))
                    if not self.accept_op(","):
                        break
                withs = []
                if self.accept_kw("with"):
                    withs.append(self.var())
                    while self.accept_op(","):
                        withs.append(self.var())
                clauses.append(A.GroupByClause(tuple(keys), tuple(withs), hints, pos=pos))
            elif self.at_kw("order"):
                self.advance()
                self.expect_kw("by")
                keys = []
                while True:
                    e = self.expr()
                    desc = False
                    if self.at_kw("asc", "desc"):
                        desc = self.advance().text.lower() == "desc"
                    keys.append((e, desc))
                    if not self.accept_op(","):
                        break
                clauses.append(A.OrderByClause(tuple(keys), pos=pos))
            elif self.at_kw("limit"):
                self.advance()
                lim = self.expr()
                off = self.expr() if self.accept_kw("offset") else None
                clauses.append(A.LimitClause(lim, off, pos=pos))
            elif self.at_kw("return"):
                self.advance()
                if not clauses or not isinstance(clauses[0], (A.ForClause, A.LetClause)):
                    raise self.error("a FLWOR expression must start with for or let", start)
                return A.Flwor(tuple(clauses), self.expr(), pos=(start.line, start.col))
            else:
                raise self.error("syntax error", expected=["'for'", "'let'", "'where'", "'group'", "'order'",
                                                           "'limit'", "'return'"])


def parse(text: str) -> list[A.Statement]:
    """Parse a script into statements."""
    return Parser(text).parse_statements()


def parse_expression(text: str) -> A.Expr:
    p = Parser(text)
    e = p.expr()
    p.accept_op(";")
    if p.tok.kind != "eof":
        raise p.error("syntax error", expected=["end of input"])
    return e


def parse_type(text: str):
    """Parse a datatype body as written after ``create type X as``."""
    p = Parser(text)
    t = p.type_body()
    if p.tok.kind != "eof":
        raise p.error("syntax error", expected=["end of input"])
    return t
