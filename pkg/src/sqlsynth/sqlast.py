"""Parse the Spider SQL subset into relational-algebra trees.

The parser produces two views of a query:

* a rich clause-level AST (``SelectStatement`` / ``SetOperation``) used by the
  pseudo-English renderer, the evaluation metrics, and the SQL re-renderer;
* an ordered labeled tree of ``RaNode`` used for tree-edit-distance
  comparisons.

Tree convention: the SELECT root carries the projections; predicates and
table leaves live under a FROM node (the FROM node is elided when the query
has a single table and no predicates, so ``SELECT avg(x) FROM film`` is a
4-node tree). GROUP BY / HAVING / ORDER BY / LIMIT attach as additional
children of the SELECT root, in that order.

Supported subset: SELECT lists with aggregations and DISTINCT, FROM with
JOINs and subqueries, WHERE/HAVING with AND/OR/NOT and comparison / LIKE /
IN / NOT IN / BETWEEN predicates, GROUP BY, ORDER BY ASC/DESC, LIMIT, and
UNION / INTERSECT / EXCEPT. Aliases are resolved and erased during parsing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

from .errors import ResolutionError, SqlParseError

__all__ = [
    "Group",
    "LeafKind",
    "RaNode",
    "parse_sql",
    "parse_statement",
    "to_ra_tree",
    "anonymize",
    "tree_size",
    "render_tree",
    "render_sql",
    "iter_nodes",
]


# ---------------------------------------------------------------------------
# TED node groups
# ---------------------------------------------------------------------------

class Group(Enum):
    AGGREGATION = "Aggregation"
    ORDER = "Order"
    BOOLEAN = "Boolean"
    SET = "Set"
    LEAF = "Leaf"
    SIMILARITY = "Similarity"
    COMPARISON = "Comparison"
    OTHER = "Other"


class LeafKind(Enum):
    TABLE = "table"
    COLUMN = "column"
    LITERAL = "literal"
    VAL_LIST = "val_list"


ANON_PLACEHOLDER = {
    LeafKind.TABLE: "⟨tbl⟩",
    LeafKind.COLUMN: "⟨col⟩",
    LeafKind.LITERAL: "⟨lit⟩",
    LeafKind.VAL_LIST: "⟨vals⟩",
}

_LABEL_GROUPS = {
    **{v: Group.AGGREGATION for v in ("MAX", "MIN", "AVG", "COUNT", "SUM")},
    **{v: Group.ORDER for v in ("ORDERBY_ASC", "ORDERBY_DESC")},
    **{v: Group.BOOLEAN for v in ("OR", "AND")},
    **{v: Group.SET for v in ("UNION", "INTERSECT", "EXCEPT")},
    **{v: Group.SIMILARITY for v in ("LIKE", "IN", "NOT_IN")},
    **{v: Group.COMPARISON for v in (">", ">=", "<", "<=", "=", "!=")},
}


@dataclass(frozen=True)
class RaNode:
    """Node of the relational-algebra tree: a label, an optional leaf kind
    (tables, columns, literals, and literal lists are the only leaves), and
    ordered children."""

    value: str
    children: tuple["RaNode", ...] = ()
    leaf_kind: Optional[LeafKind] = None

    @property
    def group(self) -> Group:
        if self.leaf_kind is not None:
            return Group.LEAF
        return _LABEL_GROUPS.get(self.value, Group.OTHER)

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return render_tree(self)


def iter_nodes(tree: RaNode) -> Iterator[RaNode]:
    """Preorder traversal."""
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def tree_size(tree: RaNode) -> int:
    """Total number of nodes."""
    return sum(1 for _ in iter_nodes(tree))


def anonymize(tree: RaNode) -> RaNode:
    """Replace every leaf value by the placeholder for its kind.

    The result is shape- and label-isomorphic except at leaves, and the
    operation is idempotent.
    """
    children = tuple(anonymize(c) for c in tree.children)
    if tree.leaf_kind is not None:
        return RaNode(ANON_PLACEHOLDER[tree.leaf_kind], children, tree.leaf_kind)
    return RaNode(tree.value, children, None)


_RENDER_PREFIX = {
    "SELECT": "Table",
    "FROM": "Table",
    "GROUPBY": "Group",
    "HAVING": "Having",
    "LIMIT": "Limit",
    "DISTINCT": "Distinct",
}


def _node_prefix(node: RaNode) -> str:
    if node.leaf_kind is LeafKind.TABLE:
        return "Table"
    if node.leaf_kind in (LeafKind.COLUMN, LeafKind.LITERAL):
        return "Value"
    if node.leaf_kind is LeafKind.VAL_LIST:
        return "Values"
    group = node.group
    if group is Group.AGGREGATION:
        return "Agg"
    if group is Group.ORDER:
        return "Order"
    if group is Group.SET:
        return "Set"
    if group in (Group.BOOLEAN, Group.COMPARISON, Group.SIMILARITY):
        return "Predicate"
    if node.value in _RENDER_PREFIX:
        return _RENDER_PREFIX[node.value]
    if node.value in ("NOT", "NOT_LIKE", "BETWEEN"):
        return "Predicate"
    return "Op"


def render_tree(tree: RaNode) -> str:
    """Bracket rendering, e.g. ``Table(SELECT)[Agg(COUNT)[Value(*)],...]``."""
    head = f"{_node_prefix(tree)}({tree.value})"
    if not tree.children:
        return head
    return head + "[" + ",".join(render_tree(c) for c in tree.children) + "]"


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<str>'(?:[^']|'')*'|"(?:[^"]|"")*")
    | (?P<num>\d+\.\d*|\.\d+|\d+)
    | (?P<op>!=|<>|<=|>=|=|<|>)
    | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<punct>[(),.;*+\-/%])
    """,
    re.VERBOSE,
)

_KEYWORDS = {
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT",
    "JOIN", "INNER", "LEFT", "OUTER", "ON", "AS", "AND", "OR", "NOT", "IN",
    "LIKE", "BETWEEN", "DISTINCT", "UNION", "INTERSECT", "EXCEPT", "ALL",
    "ASC", "DESC", "MAX", "MIN", "COUNT", "SUM", "AVG",
}

_AGG_FNS = {"MAX", "MIN", "COUNT", "SUM", "AVG"}


@dataclass(frozen=True)
class _Token:
    kind: str  # STR | NUM | ID | KW | OP | PUNCT | EOF
    text: str
    pos: int

    def upper(self) -> str:
        return self.text.upper()


def _tokenize(sql: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if m is None:
            raise SqlParseError(f"unexpected character {sql[pos]!r}", pos)
        if m.lastgroup != "ws":
            kind = {"str": "STR", "num": "NUM", "op": "OP", "punct": "PUNCT"}.get(
                m.lastgroup, "ID"
            )
            text = m.group()
            if kind == "ID" and text.upper() in _KEYWORDS:
                kind = "KW"
            if kind == "PUNCT" and text == ";":
                pos = m.end()
                continue
            tokens.append(_Token(kind, text, pos))
        pos = m.end()
    tokens.append(_Token("EOF", "", len(sql)))
    return tokens


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnRef:
    """A column reference; ``table`` is the resolved table name (original
    schema spelling) and ``source`` the index of the owning FROM source, both
    None when unresolvable. ``column`` is "*" for the star column."""

    column: str
    table: Optional[str] = None
    source: Optional[int] = None


@dataclass(frozen=True)
class Literal:
    value: Union[int, float, str]
    raw: str  # original lexeme, quotes included for strings


@dataclass(frozen=True)
class ValueList:
    items: tuple[Literal, ...]


@dataclass(frozen=True)
class AggExpr:
    fn: str  # MAX | MIN | COUNT | SUM | AVG
    arg: "Expr"
    distinct: bool = False


@dataclass(frozen=True)
class ArithExpr:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Subquery:
    statement: "Statement"


Expr = Union[ColumnRef, Literal, ValueList, AggExpr, ArithExpr, Subquery]


@dataclass(frozen=True)
class Comparison:
    op: str  # = != > < >= <=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class LikePredicate:
    left: Expr
    pattern: Expr
    negated: bool = False


@dataclass(frozen=True)
class InPredicate:
    left: Expr
    right: Expr  # Subquery or ValueList
    negated: bool = False


@dataclass(frozen=True)
class BetweenPredicate:
    left: Expr
    low: Expr
    high: Expr


@dataclass(frozen=True)
class NotCondition:
    inner: "Condition"


@dataclass(frozen=True)
class BoolCondition:
    op: str  # AND | OR
    left: "Condition"
    right: "Condition"


Condition = Union[Comparison, LikePredicate, InPredicate, BetweenPredicate,
                  NotCondition, BoolCondition]


@dataclass(frozen=True)
class TableSource:
    """One FROM source: either a named table or a subquery."""

    table: Optional[str] = None
    subquery: Optional[Subquery] = None


@dataclass(frozen=True)
class OrderBy:
    direction: str  # ASC | DESC
    keys: tuple[Expr, ...]


@dataclass(frozen=True)
class SelectStatement:
    items: tuple[Expr, ...]
    sources: tuple[TableSource, ...]
    distinct: bool = False
    on_conditions: tuple[Condition, ...] = ()
    where: Optional[Condition] = None
    group_by: tuple[Expr, ...] = ()
    having: Optional[Condition] = None
    order_by: Optional[OrderBy] = None
    limit: Optional[int] = None


@dataclass(frozen=True)
class SetOperation:
    op: str  # UNION | INTERSECT | EXCEPT
    left: "Statement"
    right: "Statement"


Statement = Union[SelectStatement, SetOperation]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

@dataclass
class _RawColumn:
    """Unresolved column reference captured during the first pass."""

    qualifier: Optional[str]
    name: str
    pos: int


class _Parser:
    def __init__(self, sql: str, schema=None):
        self.sql = sql
        self.schema = schema
        self.tokens = _tokenize(sql)
        self.i = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, offset: int = 0) -> _Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "KW" and tok.upper() in words

    def accept_kw(self, *words: str) -> Optional[_Token]:
        if self.at_kw(*words):
            return self.take()
        return None

    def expect_kw(self, word: str) -> _Token:
        tok = self.take()
        if tok.kind != "KW" or tok.upper() != word:
            raise SqlParseError(f"expected {word}, found {tok.text!r}", tok.pos)
        return tok

    def expect_punct(self, text: str) -> _Token:
        tok = self.take()
        if tok.text != text:
            raise SqlParseError(f"expected {text!r}, found {tok.text!r}", tok.pos)
        return tok

    def error(self, message: str) -> SqlParseError:
        return SqlParseError(message, self.peek().pos)

    # -- entry points -------------------------------------------------------

    def parse(self) -> Statement:
        stmt = self.parse_statement()
        tok = self.peek()
        if tok.kind != "EOF":
            raise SqlParseError(f"trailing input {tok.text!r}", tok.pos)
        return stmt

    def parse_statement(self) -> Statement:
        left: Statement = self.parse_select()
        while self.at_kw("UNION", "INTERSECT", "EXCEPT"):
            op = self.take().upper()
            self.accept_kw("ALL")
            right = self.parse_select()
            left = SetOperation(op, left, right)
        return left

    # -- SELECT -------------------------------------------------------------

    def parse_select(self) -> SelectStatement:
        paren = False
        if self.peek().text == "(" and self.peek(1).kind == "KW" and self.peek(1).upper() == "SELECT":
            # tolerated: a parenthesized select at statement level
            self.take()
            paren = True
        self.expect_kw("SELECT")
        distinct = self.accept_kw("DISTINCT") is not None
        items = [self.parse_value_expr()]
        while self.peek().text == ",":
            self.take()
            items.append(self.parse_value_expr())

        sources: list[TableSource] = []
        aliases: dict[str, int] = {}
        on_conditions: list[Condition] = []
        if self.accept_kw("FROM"):
            self._parse_from(sources, aliases, on_conditions)

        where = None
        if self.accept_kw("WHERE"):
            where = self.parse_condition()

        group_by: list[Expr] = []
        having = None
        if self.accept_kw("GROUP"):
            self.expect_kw("BY")
            group_by.append(self.parse_value_expr())
            while self.peek().text == ",":
                self.take()
                group_by.append(self.parse_value_expr())
        if self.accept_kw("HAVING"):
            having = self.parse_condition()

        order_by = None
        if self.accept_kw("ORDER"):
            self.expect_kw("BY")
            keys = [self.parse_value_expr()]
            while self.peek().text == ",":
                self.take()
                keys.append(self.parse_value_expr())
            direction = "ASC"
            tok = self.accept_kw("ASC", "DESC")
            if tok is not None:
                direction = tok.upper()
            order_by = OrderBy(direction, tuple(keys))

        limit = None
        if self.accept_kw("LIMIT"):
            tok = self.take()
            if tok.kind != "NUM":
                raise SqlParseError(f"LIMIT expects a number, found {tok.text!r}", tok.pos)
            limit = int(float(tok.text))

        if paren:
            self.expect_punct(")")

        stmt = SelectStatement(
            items=tuple(items),
            sources=tuple(sources),
            distinct=distinct,
            on_conditions=tuple(on_conditions),
            where=where,
            group_by=tuple(group_by),
            having=having,
            order_by=order_by,
            limit=limit,
        )
        return self._resolve(stmt, aliases)

    def _parse_from(self, sources, aliases, on_conditions) -> None:
        self._parse_table_source(sources, aliases)
        while True:
            if self.accept_kw("JOIN"):
                pass
            elif self.at_kw("INNER", "LEFT") :
                self.take()
                self.accept_kw("OUTER")
                self.expect_kw("JOIN")
            elif self.peek().text == ",":
                self.take()
            else:
                break
            self._parse_table_source(sources, aliases)
            if self.accept_kw("ON"):
                on_conditions.append(self.parse_condition())

    def _parse_table_source(self, sources, aliases) -> None:
        tok = self.peek()
        if tok.text == "(":
            self.take()
            sub = Subquery(self.parse_statement())
            self.expect_punct(")")
            source = TableSource(subquery=sub)
        elif tok.kind == "ID":
            self.take()
            name = tok.text
            if self.schema is not None:
                resolved = self.schema.resolve_table(name)
                if resolved is None:
                    raise ResolutionError(f"unknown table {name!r}", tok.pos)
                name = resolved
            source = TableSource(table=name)
        else:
            raise SqlParseError(f"expected a table name, found {tok.text!r}", tok.pos)
        index = len(sources)
        sources.append(source)
        if source.table is not None:
            aliases.setdefault(source.table.lower(), index)
        alias = None
        if self.accept_kw("AS"):
            alias_tok = self.take()
            if alias_tok.kind != "ID":
                raise SqlParseError(f"expected an alias, found {alias_tok.text!r}", alias_tok.pos)
            alias = alias_tok.text
        elif self.peek().kind == "ID":
            alias = self.take().text
        if alias is not None:
            aliases[alias.lower()] = index

    # -- expressions --------------------------------------------------------

    def parse_value_expr(self) -> Expr:
        left = self.parse_unit_operand()
        tok = self.peek()
        if tok.text in ("+", "-", "/", "%") or (
            tok.text == "*" and self.peek(1).kind in ("ID", "NUM", "KW") and (
                self.peek(1).kind != "KW" or self.peek(1).upper() in _AGG_FNS)
        ):
            op = self.take().text
            right = self.parse_unit_operand()
            return ArithExpr("/" if op == "%" else op, left, right)
        return left

    def parse_unit_operand(self) -> Expr:
        tok = self.peek()
        if tok.kind == "KW" and tok.upper() in _AGG_FNS:
            self.take()
            self.expect_punct("(")
            distinct = self.accept_kw("DISTINCT") is not None
            arg = self.parse_value_expr()
            self.expect_punct(")")
            return AggExpr(tok.upper(), arg, distinct)
        if tok.kind == "NUM":
            self.take()
            value = float(tok.text) if "." in tok.text else int(tok.text)
            return Literal(value, tok.text)
        if tok.text == "-" and self.peek(1).kind == "NUM":
            self.take()
            num = self.take()
            value = float(num.text) if "." in num.text else int(num.text)
            return Literal(-value, "-" + num.text)
        if tok.kind == "STR":
            self.take()
            return Literal(tok.text[1:-1], tok.text)
        if tok.text == "*":
            self.take()
            return _RawColumn(None, "*", tok.pos)  # type: ignore[return-value]
        if tok.text == "(":
            if self.peek(1).kind == "KW" and self.peek(1).upper() == "SELECT":
                self.take()
                sub = Subquery(self.parse_statement())
                self.expect_punct(")")
                return sub
            self.take()
            inner = self.parse_value_expr()
            self.expect_punct(")")
            return inner
        if tok.kind == "ID":
            self.take()
            qualifier = None
            name = tok.text
            if self.peek().text == ".":
                self.take()
                qualifier = name
                nxt = self.take()
                if nxt.text == "*":
                    name = "*"
                elif nxt.kind in ("ID", "KW"):
                    name = nxt.text
                else:
                    raise SqlParseError(f"expected a column after '.', found {nxt.text!r}", nxt.pos)
            return _RawColumn(qualifier, name, tok.pos)  # type: ignore[return-value]
        if tok.kind == "KW":
            # schema identifiers occasionally collide with soft keywords
            raise SqlParseError(f"unexpected keyword {tok.text!r}", tok.pos)
        raise SqlParseError(f"unexpected token {tok.text!r}", tok.pos)

    # -- conditions ---------------------------------------------------------

    def parse_condition(self) -> Condition:
        left = self.parse_and_condition()
        while self.accept_kw("OR"):
            right = self.parse_and_condition()
            left = BoolCondition("OR", left, right)
        return left

    def parse_and_condition(self) -> Condition:
        left = self.parse_not_condition()
        while self.accept_kw("AND"):
            right = self.parse_not_condition()
            left = BoolCondition("AND", left, right)
        return left

    def parse_not_condition(self) -> Condition:
        # NOT <cond>; `x NOT IN ...` is handled in parse_atom_condition
        if self.at_kw("NOT") and not self.peek(1).kind == "EOF":
            nxt = self.peek(1)
            if nxt.text == "(" or nxt.kind in ("ID", "NUM", "STR") or (
                nxt.kind == "KW" and nxt.upper() in _AGG_FNS
            ):
                self.take()
                return NotCondition(self.parse_not_condition())
        return self.parse_atom_condition()

    def parse_atom_condition(self) -> Condition:
        if self.peek().text == "(" and not (
            self.peek(1).kind == "KW" and self.peek(1).upper() == "SELECT"
        ):
            self.take()
            inner = self.parse_condition()
            self.expect_punct(")")
            return inner

        left = self.parse_value_expr()
        negated = self.accept_kw("NOT") is not None
        tok = self.peek()
        if not negated and tok.kind == "OP":
            op = "!=" if self.take().text == "<>" else tok.text
            right = self.parse_comparison_value()
            return Comparison(op, left, right)
        if not negated and self.accept_kw("BETWEEN"):
            low = self.parse_comparison_value()
            self.expect_kw("AND")
            high = self.parse_comparison_value()
            return BetweenPredicate(left, low, high)
        if self.accept_kw("LIKE"):
            pattern = self.parse_comparison_value()
            return LikePredicate(left, pattern, negated)
        if self.accept_kw("IN"):
            self.expect_punct("(")
            if self.at_kw("SELECT"):
                right: Expr = Subquery(self.parse_statement())
            else:
                items = [self._expect_literal()]
                while self.peek().text == ",":
                    self.take()
                    items.append(self._expect_literal())
                right = ValueList(tuple(items))
            self.expect_punct(")")
            return InPredicate(left, right, negated)
        raise SqlParseError(f"expected a predicate operator, found {tok.text!r}", tok.pos)

    def parse_comparison_value(self) -> Expr:
        tok = self.peek()
        if tok.text == "(" and self.peek(1).kind == "KW" and self.peek(1).upper() == "SELECT":
            self.take()
            sub = Subquery(self.parse_statement())
            self.expect_punct(")")
            return sub
        return self.parse_value_expr()

    def _expect_literal(self) -> Literal:
        expr = self.parse_unit_operand()
        if not isinstance(expr, Literal):
            raise self.error("IN lists may contain only literal values")
        return expr

    # -- resolution ---------------------------------------------------------

    def _resolve(self, stmt: SelectStatement, aliases: dict[str, int]) -> SelectStatement:
        resolve = lambda e: self._resolve_expr(e, stmt.sources, aliases)
        return SelectStatement(
            items=tuple(resolve(e) for e in stmt.items),
            sources=stmt.sources,
            distinct=stmt.distinct,
            on_conditions=tuple(self._resolve_cond(c, stmt.sources, aliases)
                                for c in stmt.on_conditions),
            where=self._resolve_cond(stmt.where, stmt.sources, aliases),
            group_by=tuple(resolve(e) for e in stmt.group_by),
            having=self._resolve_cond(stmt.having, stmt.sources, aliases),
            order_by=OrderBy(stmt.order_by.direction,
                             tuple(resolve(k) for k in stmt.order_by.keys))
            if stmt.order_by else None,
            limit=stmt.limit,
        )

    def _resolve_cond(self, cond, sources, aliases):
        if cond is None:
            return None
        resolve = lambda e: self._resolve_expr(e, sources, aliases)
        if isinstance(cond, Comparison):
            return Comparison(cond.op, resolve(cond.left), resolve(cond.right))
        if isinstance(cond, LikePredicate):
            return LikePredicate(resolve(cond.left), resolve(cond.pattern), cond.negated)
        if isinstance(cond, InPredicate):
            return InPredicate(resolve(cond.left), resolve(cond.right), cond.negated)
        if isinstance(cond, BetweenPredicate):
            return BetweenPredicate(resolve(cond.left), resolve(cond.low), resolve(cond.high))
        if isinstance(cond, NotCondition):
            return NotCondition(self._resolve_cond(cond.inner, sources, aliases))
        if isinstance(cond, BoolCondition):
            return BoolCondition(cond.op,
                                 self._resolve_cond(cond.left, sources, aliases),
                                 self._resolve_cond(cond.right, sources, aliases))
        raise TypeError(f"unknown condition {cond!r}")

    def _resolve_expr(self, expr, sources, aliases):
        if isinstance(expr, _RawColumn):
            return self._resolve_column(expr, sources, aliases)
        if isinstance(expr, AggExpr):
            return AggExpr(expr.fn, self._resolve_expr(expr.arg, sources, aliases), expr.distinct)
        if isinstance(expr, ArithExpr):
            return ArithExpr(expr.op,
                             self._resolve_expr(expr.left, sources, aliases),
                             self._resolve_expr(expr.right, sources, aliases))
        return expr  # literals, value lists, subqueries (already resolved)

    def _resolve_column(self, raw: _RawColumn, sources, aliases) -> ColumnRef:
        if raw.qualifier is not None:
            idx = aliases.get(raw.qualifier.lower())
            if idx is None:
                if self.schema is not None:
                    raise ResolutionError(
                        f"unknown table or alias {raw.qualifier!r}", raw.pos)
                return ColumnRef(raw.name, raw.qualifier, None)
            table = sources[idx].table
            column = raw.name
            if self.schema is not None and table is not None and column != "*":
                resolved = self.schema.resolve_column(table, column)
                if resolved is None:
                    raise ResolutionError(
                        f"unknown column {raw.qualifier}.{raw.name!r}", raw.pos)
                column = resolved
            return ColumnRef(column, table, idx)
        if raw.name == "*":
            return ColumnRef("*", None, None)
        if self.schema is not None:
            for idx, source in enumerate(sources):
                if source.table is None:
                    continue
                resolved = self.schema.resolve_column(source.table, raw.name)
                if resolved is not None:
                    return ColumnRef(resolved, source.table, idx)
            if any(source.subquery is not None for source in sources):
                return ColumnRef(raw.name, None, None)
            raise ResolutionError(f"unknown column {raw.name!r}", raw.pos)
        if len(sources) == 1 and sources[0].table is not None:
            return ColumnRef(raw.name, sources[0].table, 0)
        return ColumnRef(raw.name, None, None)


def parse_statement(sql: str, schema=None) -> Statement:
    """Parse SQL into the clause-level AST.

    ``schema`` (a :class:`sqlsynth.corpus.Schema`) enables table/column
    resolution; without it identifiers are kept raw.
    """
    return _Parser(sql, schema).parse()


def parse_sql(sql: str, schema=None) -> RaNode:
    """Parse SQL and convert it to its relational-algebra tree."""
    return to_ra_tree(parse_statement(sql, schema))


# ---------------------------------------------------------------------------
# AST -> RaNode
# ---------------------------------------------------------------------------

def _literal_leaf(lit: Literal) -> RaNode:
    value = lit.raw if not isinstance(lit.value, str) else lit.value
    return RaNode(str(value), (), LeafKind.LITERAL)


def _expr_node(expr: Expr) -> RaNode:
    if isinstance(expr, ColumnRef):
        return RaNode(expr.column, (), LeafKind.COLUMN)
    if isinstance(expr, Literal):
        return _literal_leaf(expr)
    if isinstance(expr, ValueList):
        joined = ", ".join(str(l.raw if not isinstance(l.value, str) else l.value)
                           for l in expr.items)
        return RaNode(joined, (), LeafKind.VAL_LIST)
    if isinstance(expr, AggExpr):
        children = [_expr_node(expr.arg)]
        if expr.distinct:
            children.insert(0, RaNode("DISTINCT"))
        return RaNode(expr.fn, tuple(children))
    if isinstance(expr, ArithExpr):
        return RaNode(expr.op, (_expr_node(expr.left), _expr_node(expr.right)))
    if isinstance(expr, Subquery):
        return to_ra_tree(expr.statement)
    raise TypeError(f"unknown expression {expr!r}")


def _cond_node(cond: Condition) -> RaNode:
    if isinstance(cond, Comparison):
        return RaNode(cond.op, (_expr_node(cond.left), _expr_node(cond.right)))
    if isinstance(cond, LikePredicate):
        label = "NOT_LIKE" if cond.negated else "LIKE"
        return RaNode(label, (_expr_node(cond.left), _expr_node(cond.pattern)))
    if isinstance(cond, InPredicate):
        label = "NOT_IN" if cond.negated else "IN"
        return RaNode(label, (_expr_node(cond.left), _expr_node(cond.right)))
    if isinstance(cond, BetweenPredicate):
        return RaNode("BETWEEN", (_expr_node(cond.left), _expr_node(cond.low),
                                  _expr_node(cond.high)))
    if isinstance(cond, NotCondition):
        return RaNode("NOT", (_cond_node(cond.inner),))
    if isinstance(cond, BoolCondition):
        return RaNode(cond.op, (_cond_node(cond.left), _cond_node(cond.right)))
    raise TypeError(f"unknown condition {cond!r}")


def _source_node(source: TableSource) -> RaNode:
    if source.table is not None:
        return RaNode(source.table, (), LeafKind.TABLE)
    return to_ra_tree(source.subquery.statement)


def to_ra_tree(stmt: Statement) -> RaNode:
    """Convert an AST into the relational-algebra tree used for TED."""
    if isinstance(stmt, SetOperation):
        return RaNode(stmt.op, (to_ra_tree(stmt.left), to_ra_tree(stmt.right)))

    children: list[RaNode] = []
    if stmt.distinct:
        children.append(RaNode("DISTINCT"))
    children.extend(_expr_node(item) for item in stmt.items)

    predicates = [_cond_node(c) for c in stmt.on_conditions]
    if stmt.where is not None:
        predicates.append(_cond_node(stmt.where))
    tables = [_source_node(s) for s in stmt.sources]
    if predicates or len(tables) > 1:
        children.append(RaNode("FROM", tuple(predicates + tables)))
    else:
        children.extend(tables)

    if stmt.group_by:
        children.append(RaNode("GROUPBY", tuple(_expr_node(e) for e in stmt.group_by)))
    if stmt.having is not None:
        children.append(RaNode("HAVING", (_cond_node(stmt.having),)))
    if stmt.order_by is not None:
        label = "ORDERBY_ASC" if stmt.order_by.direction == "ASC" else "ORDERBY_DESC"
        children.append(RaNode(label, tuple(_expr_node(k) for k in stmt.order_by.keys)))
    if stmt.limit is not None:
        children.append(RaNode("LIMIT", (RaNode(str(stmt.limit), (), LeafKind.LITERAL),)))

    return RaNode("SELECT", tuple(children))


# ---------------------------------------------------------------------------
# AST -> SQL text
# ---------------------------------------------------------------------------

def _render_literal(lit: Literal) -> str:
    if isinstance(lit.value, str):
        return "'" + lit.value.replace("'", "''") + "'"
    return lit.raw


class _SqlRenderer:
    def __init__(self, stmt: SelectStatement):
        self.stmt = stmt
        # alias every source when the clause has several, so self-joins stay
        # unambiguous
        self.use_aliases = len(stmt.sources) > 1

    def alias(self, index: int) -> str:
        return f"T{index + 1}"

    def render(self) -> str:
        stmt = self.stmt
        parts = ["SELECT"]
        if stmt.distinct:
            parts.append("DISTINCT")
        parts.append(", ".join(self.expr(e) for e in stmt.items))
        if stmt.sources:
            parts.append("FROM")
            sources = []
            for idx, source in enumerate(stmt.sources):
                text = (source.table if source.table is not None
                        else "(" + render_sql(source.subquery.statement) + ")")
                if self.use_aliases:
                    text += f" AS {self.alias(idx)}"
                sources.append(text)
            joined = sources[0]
            conds = list(stmt.on_conditions)
            for idx, text in enumerate(sources[1:]):
                joined += f" JOIN {text}"
                if idx < len(conds):
                    joined += " ON " + self.cond(conds[idx])
            parts.append(joined)
        if stmt.where is not None:
            parts.append("WHERE " + self.cond(stmt.where))
        if stmt.group_by:
            parts.append("GROUP BY " + ", ".join(self.expr(e) for e in stmt.group_by))
        if stmt.having is not None:
            parts.append("HAVING " + self.cond(stmt.having))
        if stmt.order_by is not None:
            parts.append("ORDER BY "
                         + ", ".join(self.expr(k) for k in stmt.order_by.keys)
                         + " " + stmt.order_by.direction)
        if stmt.limit is not None:
            parts.append(f"LIMIT {stmt.limit}")
        return " ".join(parts)

    def expr(self, expr: Expr) -> str:
        if isinstance(expr, ColumnRef):
            if self.use_aliases and expr.source is not None:
                return f"{self.alias(expr.source)}.{expr.column}"
            return expr.column
        if isinstance(expr, Literal):
            return _render_literal(expr)
        if isinstance(expr, ValueList):
            return ", ".join(_render_literal(l) for l in expr.items)
        if isinstance(expr, AggExpr):
            inner = self.expr(expr.arg)
            if expr.distinct:
                inner = "DISTINCT " + inner
            return f"{expr.fn.lower()}({inner})"
        if isinstance(expr, ArithExpr):
            return f"{self.expr(expr.left)} {expr.op} {self.expr(expr.right)}"
        if isinstance(expr, Subquery):
            return "(" + render_sql(expr.statement) + ")"
        raise TypeError(f"unknown expression {expr!r}")

    def cond(self, cond: Condition, parent: str = "OR") -> str:
        if isinstance(cond, Comparison):
            return f"{self.expr(cond.left)} {cond.op} {self.expr(cond.right)}"
        if isinstance(cond, LikePredicate):
            op = "NOT LIKE" if cond.negated else "LIKE"
            return f"{self.expr(cond.left)} {op} {self.expr(cond.pattern)}"
        if isinstance(cond, InPredicate):
            op = "NOT IN" if cond.negated else "IN"
            if isinstance(cond.right, Subquery):
                inner = render_sql(cond.right.statement)
            else:
                inner = self.expr(cond.right)
            return f"{self.expr(cond.left)} {op} ({inner})"
        if isinstance(cond, BetweenPredicate):
            return (f"{self.expr(cond.left)} BETWEEN {self.expr(cond.low)}"
                    f" AND {self.expr(cond.high)}")
        if isinstance(cond, NotCondition):
            return "NOT (" + self.cond(cond.inner) + ")"
        if isinstance(cond, BoolCondition):
            text = (self.cond(cond.left, cond.op) + f" {cond.op} "
                    + self.cond(cond.right, cond.op))
            # OR nested under AND needs explicit grouping to survive a reparse
            if cond.op == "OR" and parent == "AND":
                return "(" + text + ")"
            return text
        raise TypeError(f"unknown condition {cond!r}")


def render_sql(stmt: Statement) -> str:
    """Render an AST back to canonical SQL text (round-trip stable)."""
    if isinstance(stmt, SetOperation):
        return f"{render_sql(stmt.left)} {stmt.op} {render_sql(stmt.right)}"
    return _SqlRenderer(stmt).render()
