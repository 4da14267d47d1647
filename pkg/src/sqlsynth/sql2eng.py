"""Deterministic pseudo-English rendering of SQL trees.

The output is machine-oriented conditioning text for fill backends, not
fluent English: every table / column / value token is wrapped in
``⟦kind:token⟧`` markers so a generator knows which tokens are likely to
surface in the output question. Rendering is injective in practice and
byte-deterministic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator

from .sqlast import Group, LeafKind, RaNode

__all__ = ["PseudoSql", "Span", "to_pseudo_english", "strip_markers"]

OPEN = "⟦"   # ⟦
CLOSE = "⟧"  # ⟧

_SPAN_KIND = {
    LeafKind.TABLE: "table",
    LeafKind.COLUMN: "column",
    LeafKind.LITERAL: "value",
    LeafKind.VAL_LIST: "value",
}

_AGG_WORDS = {
    "COUNT": "count",
    "AVG": "average",
    "MAX": "maximum",
    "MIN": "minimum",
    "SUM": "sum",
}

_OP_WORDS = {
    ">": "greater than",
    ">=": "at least",
    "<": "less than",
    "<=": "at most",
    "=": "equals",
    "!=": "not equals",
    "LIKE": "like",
    "NOT_LIKE": "not like",
    "IN": "in",
    "NOT_IN": "not in",
}

_ARITH_WORDS = {"+": "plus", "-": "minus", "*": "times", "/": "divided by"}

_SET_WORDS = {"UNION": "union", "INTERSECT": "intersection", "EXCEPT": "difference"}

_MARKER_RE = re.compile(
    f"{OPEN}(?:table|column|value):(.*?){CLOSE}")


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    kind: str  # table | column | value


@dataclass(frozen=True)
class PseudoSql:
    text: str
    spans: tuple[Span, ...]

    def span_texts(self) -> list[str]:
        return [self.text[s.start:s.end] for s in self.spans]

    def spans_of_kind(self, kind: str) -> list[str]:
        return [self.text[s.start:s.end] for s in self.spans if s.kind == kind]

    def stripped(self) -> str:
        """Text with all wrapping markers removed."""
        return strip_markers(self.text)

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "spans": [{"start": s.start, "end": s.end, "kind": s.kind}
                      for s in self.spans],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "PseudoSql":
        return cls(payload["text"],
                   tuple(Span(s["start"], s["end"], s["kind"])
                         for s in payload["spans"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True)


def strip_markers(text: str) -> str:
    return _MARKER_RE.sub(r"\1", text)


class _Builder:
    def __init__(self):
        self.parts: list[str] = []
        self.length = 0
        self.spans: list[Span] = []

    def word(self, text: str) -> None:
        if self.parts:
            self.length += 1  # the joining space
        self.parts.append(text)
        self.length += len(text)

    def leaf(self, node: RaNode) -> None:
        kind = _SPAN_KIND[node.leaf_kind]
        prefix = f"{OPEN}{kind}:"
        if self.parts:
            self.length += 1
        start = self.length + len(prefix)
        self.parts.append(f"{prefix}{node.value}{CLOSE}")
        self.spans.append(Span(start, start + len(node.value), kind))
        self.length += len(self.parts[-1])

    def result(self) -> PseudoSql:
        return PseudoSql(" ".join(self.parts), tuple(self.spans))


def _split_select_children(node: RaNode):
    distinct = False
    projections, from_part = [], None
    group_by = having = order_by = limit = None
    for child in node.children:
        if child.value == "DISTINCT" and not child.children:
            distinct = True
        elif child.value == "FROM" or child.leaf_kind is LeafKind.TABLE \
                or child.value == "SELECT" or child.group is Group.SET:
            from_part = child
        elif child.value == "GROUPBY":
            group_by = child
        elif child.value == "HAVING":
            having = child
        elif child.group is Group.ORDER:
            order_by = child
        elif child.value == "LIMIT":
            limit = child
        else:
            projections.append(child)
    return distinct, projections, from_part, group_by, having, order_by, limit


def _emit_expr(node: RaNode, out: _Builder) -> None:
    if node.leaf_kind is not None:
        out.leaf(node)
        return
    if node.group is Group.AGGREGATION:
        out.word("the")
        out.word(_AGG_WORDS[node.value])
        out.word("of")
        for child in node.children:
            if child.value == "DISTINCT" and not child.children:
                out.word("distinct")
            else:
                _emit_expr(child, out)
        return
    if node.value in _ARITH_WORDS and len(node.children) == 2:
        _emit_expr(node.children[0], out)
        out.word(_ARITH_WORDS[node.value])
        _emit_expr(node.children[1], out)
        return
    if node.value == "SELECT" or node.group is Group.SET:
        out.word("(")
        _emit_statement(node, out)
        out.word(")")
        return
    raise ValueError(f"unexpected expression node {node.value!r}")


def _emit_condition(node: RaNode, out: _Builder) -> None:
    if node.group is Group.BOOLEAN:
        _emit_condition(node.children[0], out)
        out.word(node.value.lower())
        _emit_condition(node.children[1], out)
        return
    if node.value == "NOT":
        out.word("not")
        _emit_condition(node.children[0], out)
        return
    if node.value == "BETWEEN":
        _emit_expr(node.children[0], out)
        out.word("between")
        _emit_expr(node.children[1], out)
        out.word("and")
        _emit_expr(node.children[2], out)
        return
    if node.value in _OP_WORDS:
        _emit_expr(node.children[0], out)
        for word in _OP_WORDS[node.value].split(" "):
            out.word(word)
        _emit_expr(node.children[1], out)
        return
    raise ValueError(f"unexpected condition node {node.value!r}")


def _emit_statement(node: RaNode, out: _Builder) -> None:
    if node.group is Group.SET:
        out.word(_SET_WORDS[node.value])
        out.word("of")
        _emit_statement(node.children[0], out)
        out.word("and")
        _emit_statement(node.children[1], out)
        return

    distinct, projections, from_part, group_by, having, order_by, limit = \
        _split_select_children(node)
    out.word("find")
    if distinct:
        out.word("distinct")
    for i, projection in enumerate(projections):
        if i:
            out.word("and")
        _emit_expr(projection, out)

    if from_part is not None:
        tables, predicates = [], []
        if from_part.value == "FROM":
            for child in from_part.children:
                if child.leaf_kind is LeafKind.TABLE or child.value == "SELECT" \
                        or child.group is Group.SET:
                    tables.append(child)
                else:
                    predicates.append(child)
        else:
            tables.append(from_part)
        out.word("from")
        for i, table in enumerate(tables):
            if i:
                out.word("and")
            if table.leaf_kind is LeafKind.TABLE:
                out.leaf(table)
            else:
                out.word("(")
                _emit_statement(table, out)
                out.word(")")
        if predicates:
            out.word("where")
            for i, predicate in enumerate(predicates):
                if i:
                    out.word("and")
                _emit_condition(predicate, out)

    if group_by is not None:
        out.word("for")
        out.word("each")
        for i, key in enumerate(group_by.children):
            if i:
                out.word("and")
            _emit_expr(key, out)
    if having is not None:
        out.word("having")
        for condition in having.children:
            _emit_condition(condition, out)
    if order_by is not None:
        out.word("sorted")
        out.word("by")
        for i, key in enumerate(order_by.children):
            if i:
                out.word("and")
            _emit_expr(key, out)
        out.word("ascending" if node_direction(order_by) == "ASC" else "descending")
    if limit is not None:
        out.word("top")
        for child in limit.children:
            out.leaf(child)


def node_direction(order_node: RaNode) -> str:
    return "ASC" if order_node.value == "ORDERBY_ASC" else "DESC"


def to_pseudo_english(tree: RaNode) -> PseudoSql:
    """Render a parsed SQL tree as marked-up pseudo-English.

    Every leaf of the tree contributes exactly one wrapped span; output is
    byte-deterministic for a given tree.
    """
    out = _Builder()
    _emit_statement(tree, out)
    return out.result()
