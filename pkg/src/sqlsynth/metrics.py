"""Evaluation metrics: BLEU-4 / SelfBLEU text quality and diversity, exact
set match and execution accuracy for SQL, and the query hardness ladder.

Exact set match compares queries clause by clause, insensitive to aliases,
literal values, SELECT column order, and AND/OR conjunct order. BLEU uses
lowercased punctuation-split tokens with add-epsilon smoothing (0.1) on
zero n-gram counts and effective-order handling for short hypotheses; the
smoothing choice is pinned here because diversity magnitudes depend on it.
"""

from __future__ import annotations

import math
import sqlite3
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .corpus import Schema
from .errors import SqlParseError, SqlSynthError
from .masking import tokenize
from . import sqlast
from .sqlast import SelectStatement, SetOperation, Statement, parse_statement

__all__ = [
    "EvaluationError",
    "bleu4",
    "self_bleu",
    "exact_set_match",
    "execution_accuracy",
    "hardness",
    "quality_diversity_report",
    "QualityDiversityReport",
    "EvalReport",
    "evaluate_pairs",
]


class EvaluationError(SqlSynthError):
    """A gold-side artifact (SQL or database) is unusable."""


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def _bleu_tokens(text: str) -> list[str]:
    return [t.lower() for t in tokenize(text)]


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(hypothesis: str, references: Sequence[str], epsilon: float = 0.1) -> float:
    """Sentence BLEU-4 in [0, 100]: uniform weights over the n-gram orders
    the hypothesis supports, add-epsilon smoothing on zero counts, standard
    brevity penalty against the closest reference length."""
    if not hypothesis.split():
        raise ValueError("hypothesis must be non-empty")
    refs = [_bleu_tokens(r) for r in references if r.split()]
    if not refs:
        raise ValueError("at least one non-empty reference required")
    hyp = _bleu_tokens(hypothesis)
    log_sum = 0.0
    orders = 0
    for n in range(1, 5):
        hyp_counts = _ngram_counts(hyp, n)
        total = sum(hyp_counts.values())
        if total == 0:
            continue
        max_ref: Counter = Counter()
        for ref in refs:
            for gram, count in _ngram_counts(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        clipped = sum(min(count, max_ref[gram]) for gram, count in hyp_counts.items())
        precision = clipped / total if clipped > 0 else epsilon / total
        log_sum += math.log(precision)
        orders += 1
    if orders == 0:
        return 0.0
    geo_mean = math.exp(log_sum / orders)
    closest_ref = min(refs, key=lambda r: (abs(len(r) - len(hyp)), len(r)))
    if len(hyp) >= len(closest_ref):
        brevity = 1.0
    else:
        brevity = math.exp(1.0 - len(closest_ref) / len(hyp))
    return 100.0 * brevity * geo_mean


def self_bleu(texts: Sequence[str]) -> float:
    """Average BLEU of each text against the rest; lower means more
    diverse."""
    if len(texts) < 2:
        raise ValueError("self_bleu needs at least two texts")
    scores = []
    for i, text in enumerate(texts):
        others = list(texts[:i]) + list(texts[i + 1:])
        scores.append(bleu4(text, others))
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# Exact set match
# ---------------------------------------------------------------------------

_LIT = ("lit",)


def _canon_expr(expr):
    if isinstance(expr, sqlast.ColumnRef):
        table = expr.table.lower() if expr.table else ""
        return ("col", table, expr.column.lower())
    if isinstance(expr, sqlast.Literal):
        return _LIT
    if isinstance(expr, sqlast.ValueList):
        return ("vals",)
    if isinstance(expr, sqlast.AggExpr):
        return ("agg", expr.fn, expr.distinct, _canon_expr(expr.arg))
    if isinstance(expr, sqlast.ArithExpr):
        return ("arith", expr.op, _canon_expr(expr.left), _canon_expr(expr.right))
    if isinstance(expr, sqlast.Subquery):
        return ("sub", _canon_stmt(expr.statement))
    raise TypeError(f"unknown expression {expr!r}")


def _flatten_bool(cond, op: str) -> list:
    if isinstance(cond, sqlast.BoolCondition) and cond.op == op:
        return _flatten_bool(cond.left, op) + _flatten_bool(cond.right, op)
    return [cond]


def _canon_cond(cond):
    if cond is None:
        return None
    if isinstance(cond, sqlast.Comparison):
        return ("cmp", cond.op, _canon_expr(cond.left), _canon_expr(cond.right))
    if isinstance(cond, sqlast.LikePredicate):
        return ("like", cond.negated, _canon_expr(cond.left))
    if isinstance(cond, sqlast.InPredicate):
        return ("in", cond.negated, _canon_expr(cond.left), _canon_expr(cond.right))
    if isinstance(cond, sqlast.BetweenPredicate):
        return ("between", _canon_expr(cond.left), _canon_expr(cond.low),
                _canon_expr(cond.high))
    if isinstance(cond, sqlast.NotCondition):
        return ("not", _canon_cond(cond.inner))
    if isinstance(cond, sqlast.BoolCondition):
        parts = frozenset(Counter(
            _canon_cond(c) for c in _flatten_bool(cond, cond.op)).items())
        return ("bool", cond.op, parts)
    raise TypeError(f"unknown condition {cond!r}")


def _canon_source(source: sqlast.TableSource):
    if source.table is not None:
        return ("table", source.table.lower())
    return ("sub", _canon_stmt(source.subquery.statement))


def _canon_stmt(stmt: Statement):
    if isinstance(stmt, SetOperation):
        return ("setop", stmt.op, _canon_stmt(stmt.left), _canon_stmt(stmt.right))
    select_items = frozenset(Counter(_canon_expr(e) for e in stmt.items).items())
    from_tables = frozenset(Counter(_canon_source(s) for s in stmt.sources).items())
    group = frozenset(Counter(_canon_expr(e) for e in stmt.group_by).items())
    order = None
    if stmt.order_by is not None:
        order = (stmt.order_by.direction,
                 tuple(_canon_expr(k) for k in stmt.order_by.keys))
    return (
        "select",
        stmt.distinct,
        select_items,
        from_tables,
        _canon_cond(stmt.where),
        group,
        _canon_cond(stmt.having),
        order,
        stmt.limit is not None,
    )


def exact_set_match(pred_sql: str, gold_sql: str,
                    schema: Optional[Schema] = None) -> bool:
    """Clause-wise set equivalence: aliases, literal values, SELECT column
    order, and AND/OR conjunct order never matter. An unparseable prediction
    is a miss; an unparseable gold is an error."""
    try:
        gold = parse_statement(gold_sql, schema)
    except SqlParseError as exc:
        raise EvaluationError(f"gold SQL does not parse: {exc}") from exc
    try:
        pred = parse_statement(pred_sql, schema)
    except SqlParseError:
        return False
    return _canon_stmt(pred) == _canon_stmt(gold)


# ---------------------------------------------------------------------------
# Execution accuracy
# ---------------------------------------------------------------------------

def _execute(sql: str, connection: sqlite3.Connection) -> list[tuple]:
    cursor = connection.execute(sql)
    return [tuple(row) for row in cursor.fetchall()]


def _gold_is_ordered(gold_sql: str) -> bool:
    try:
        stmt = parse_statement(gold_sql)
    except SqlParseError:
        return "order by" in gold_sql.lower()
    while isinstance(stmt, SetOperation):
        stmt = stmt.left
    return stmt.order_by is not None


def execution_accuracy(pred_sql: str, gold_sql: str, db: str | Path) -> bool:
    """Execute both queries; equal result sequences (ordered when the gold
    has a top-level ORDER BY, multisets otherwise) count as a hit. A failing
    prediction is a miss; a failing gold is an error."""
    db = Path(db)
    if not db.exists():
        raise EvaluationError(f"database file not found: {db}")
    with sqlite3.connect(f"file:{db}?mode=ro", uri=True) as connection:
        connection.text_factory = lambda raw: raw.decode("utf-8", "replace")
        try:
            gold_rows = _execute(gold_sql, connection)
        except sqlite3.Error as exc:
            raise EvaluationError(f"gold SQL failed to execute: {exc}") from exc
        try:
            pred_rows = _execute(pred_sql, connection)
        except sqlite3.Error:
            return False
    if _gold_is_ordered(gold_sql):
        return pred_rows == gold_rows
    return Counter(map(repr, pred_rows)) == Counter(map(repr, gold_rows))


# ---------------------------------------------------------------------------
# Hardness
# ---------------------------------------------------------------------------

def _atomic_conds(cond) -> list:
    if cond is None:
        return []
    if isinstance(cond, sqlast.BoolCondition):
        return _atomic_conds(cond.left) + _atomic_conds(cond.right)
    if isinstance(cond, sqlast.NotCondition):
        return _atomic_conds(cond.inner)
    return [cond]


def _count_or(cond) -> int:
    if cond is None:
        return 0
    if isinstance(cond, sqlast.BoolCondition):
        own = 1 if cond.op == "OR" else 0
        return own + _count_or(cond.left) + _count_or(cond.right)
    if isinstance(cond, sqlast.NotCondition):
        return _count_or(cond.inner)
    return 0


def _cond_subqueries(cond) -> int:
    total = 0
    for atom in _atomic_conds(cond):
        values = []
        if isinstance(atom, sqlast.Comparison):
            values = [atom.right]
        elif isinstance(atom, sqlast.InPredicate):
            values = [atom.right]
        elif isinstance(atom, sqlast.BetweenPredicate):
            values = [atom.low, atom.high]
        total += sum(1 for v in values if isinstance(v, sqlast.Subquery))
    return total


def _count_aggs(exprs) -> int:
    total = 0
    for expr in exprs:
        if isinstance(expr, sqlast.AggExpr):
            total += 1 + _count_aggs([expr.arg])
        elif isinstance(expr, sqlast.ArithExpr):
            total += _count_aggs([expr.left, expr.right])
    return total


def hardness(sql: str | Statement, schema: Optional[Schema] = None) -> str:
    """easy / medium / hard / extra, from component counts (joins,
    predicates, aggregations, nesting, set operators) following the standard
    ladder used for Spider-style evaluation."""
    stmt = parse_statement(sql, schema) if isinstance(sql, str) else sql
    set_ops = 0
    while isinstance(stmt, SetOperation):
        set_ops += 1
        stmt = stmt.left

    where_conds = _atomic_conds(stmt.where)
    having_conds = _atomic_conds(stmt.having)

    comp1 = 0
    comp1 += 1 if stmt.where is not None else 0
    comp1 += 1 if stmt.group_by else 0
    comp1 += 1 if stmt.order_by is not None else 0
    comp1 += 1 if stmt.limit is not None else 0
    comp1 += max(0, len(stmt.sources) - 1)
    comp1 += _count_or(stmt.where) + _count_or(stmt.having)
    comp1 += sum(1 for c in where_conds + having_conds
                 if isinstance(c, sqlast.LikePredicate))

    comp2 = set_ops
    for cond in (stmt.where, stmt.having, *stmt.on_conditions):
        comp2 += _cond_subqueries(cond)

    agg_count = _count_aggs(stmt.items)
    agg_count += _count_aggs(stmt.group_by)
    if stmt.order_by is not None:
        agg_count += _count_aggs(stmt.order_by.keys)
    agg_count += _count_aggs(
        [c.left for c in where_conds + having_conds if hasattr(c, "left")])
    others = 0
    others += 1 if agg_count > 1 else 0
    others += 1 if len(stmt.items) > 1 else 0
    others += 1 if len(where_conds) > 1 else 0
    others += 1 if len(stmt.group_by) > 1 else 0

    if comp1 <= 1 and others == 0 and comp2 == 0:
        return "easy"
    if (others <= 2 and comp1 <= 1 and comp2 == 0) or \
            (comp1 <= 2 and others < 2 and comp2 == 0):
        return "medium"
    if (others > 2 and comp1 <= 2 and comp2 == 0) or \
            (2 < comp1 <= 3 and others <= 2 and comp2 == 0) or \
            (comp1 <= 1 and others == 0 and comp2 <= 1):
        return "hard"
    return "extra"


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class QualityDiversityReport:
    bleu: float
    diversity: float  # 100 - SelfBLEU, averaged over SQLs with >= 2 texts
    sql_count: int
    diversity_skipped: int  # SQLs with a single hypothesis

    def as_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "diversity": self.diversity,
            "sql_count": self.sql_count,
            "diversity_skipped": self.diversity_skipped,
        }


def quality_diversity_report(generated: dict, gold: dict) -> QualityDiversityReport:
    """Best-of-k BLEU against the gold reference plus 100-SelfBLEU diversity
    over each SQL's hypothesis set."""
    if not generated:
        raise ValueError("no generated texts")
    bleu_scores = []
    diversity_scores = []
    skipped = 0
    for sql_id, texts in sorted(generated.items(), key=lambda kv: str(kv[0])):
        if not texts:
            raise ValueError(f"empty hypothesis list for {sql_id!r}")
        if sql_id not in gold:
            raise EvaluationError(f"missing gold reference for {sql_id!r}")
        reference = gold[sql_id]
        bleu_scores.append(max(bleu4(t, [reference]) for t in texts))
        if len(texts) >= 2:
            diversity_scores.append(100.0 - self_bleu(texts))
        else:
            skipped += 1
    diversity = (sum(diversity_scores) / len(diversity_scores)
                 if diversity_scores else 0.0)
    return QualityDiversityReport(
        bleu=sum(bleu_scores) / len(bleu_scores),
        diversity=diversity,
        sql_count=len(bleu_scores),
        diversity_skipped=skipped,
    )


@dataclass
class EvalReport:
    rows: list[dict] = field(default_factory=list)

    def add(self, *, em: bool, ex: Optional[bool], hardness_label: str,
            db_id: str) -> None:
        self.rows.append({"em": em, "ex": ex, "hardness": hardness_label,
                          "db_id": db_id})

    def aggregates(self) -> dict:
        total = len(self.rows)
        em_hits = sum(1 for r in self.rows if r["em"])
        ex_rows = [r for r in self.rows if r["ex"] is not None]
        per_hardness: dict[str, dict[str, int]] = {}
        for row in self.rows:
            bucket = per_hardness.setdefault(
                row["hardness"], {"count": 0, "em": 0})
            bucket["count"] += 1
            bucket["em"] += 1 if row["em"] else 0
        return {
            "count": total,
            "em": em_hits / total if total else 0.0,
            "ex": (sum(1 for r in ex_rows if r["ex"]) / len(ex_rows)
                   if ex_rows else None),
            "per_hardness": per_hardness,
        }

    def render_table(self) -> str:
        agg = self.aggregates()
        lines = [f"examples: {agg['count']}",
                 f"exact match: {agg['em']:.3f}"]
        if agg["ex"] is not None:
            lines.append(f"execution: {agg['ex']:.3f}")
        for label in ("easy", "medium", "hard", "extra"):
            bucket = agg["per_hardness"].get(label)
            if bucket:
                lines.append(
                    f"  {label:<7} n={bucket['count']:<5} em={bucket['em'] / bucket['count']:.3f}")
        return "\n".join(lines)


def evaluate_pairs(pairs: Sequence[tuple[str, str, str]],
                   schemas: dict[str, Schema],
                   with_execution: bool = False) -> EvalReport:
    """Evaluate (prediction, gold, db_id) triples; execution accuracy is
    attempted when the schema carries a database path."""
    report = EvalReport()
    for pred, gold, db_id in pairs:
        schema = schemas.get(db_id)
        em = exact_set_match(pred, gold, schema)
        label = hardness(gold, schema)
        ex = None
        if with_execution and schema is not None and schema.db_path is not None:
            ex = execution_accuracy(pred, gold, schema.db_path)
        report.add(em=em, ex=ex, hardness_label=label, db_id=db_id)
    return report
