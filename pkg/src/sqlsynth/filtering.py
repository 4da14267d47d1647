"""Consistency filtering of synthesized (text, SQL) pairs.

Training data for the filter comes for free: every corpus pair is a
positive, and six systematic perturbations of it (value swaps, operator
swaps, their cascade, SQL replacement, token drops, span shuffles) are the
negatives. The scorer is a linear model over engineered features — a
desk-scale stand-in with the same interface a neural scorer would plug
into — trained with a per-group binary-cross-entropy term plus a softmax
contrast term, and applied as top-k selection with a probability threshold.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import ParallelExample, Schema, sample_column_values
from .errors import CorpusError, SqlParseError
from .masking import SchemaFrequencyTable, normalize_token, tokenize
from .sql2eng import PseudoSql, to_pseudo_english
from . import sqlast
from .sqlast import RaNode, parse_statement, render_sql, to_ra_tree

__all__ = [
    "NegativeKind",
    "Negative",
    "NegativeSet",
    "FilterModel",
    "RemoteScorer",
    "ScoringContext",
    "ScoredCandidate",
    "gen_negatives",
    "featurize",
    "FEATURE_DIM",
    "loss_bce",
    "loss_bce_grad",
    "loss_xent",
    "loss_xent_grad",
    "train_filter",
    "select_and_filter",
    "sigmoid",
]


class NegativeKind(Enum):
    VALUE_SWAP = "value_swap"
    TOKEN_SWAP = "token_swap"
    CASCADE = "cascade"
    SQL_SWAP = "sql_swap"
    TEXT_DROP = "text_drop"
    TEXT_SHUFFLE = "text_shuffle"


KIND_ORDER = (
    NegativeKind.VALUE_SWAP,
    NegativeKind.TOKEN_SWAP,
    NegativeKind.CASCADE,
    NegativeKind.SQL_SWAP,
    NegativeKind.TEXT_DROP,
    NegativeKind.TEXT_SHUFFLE,
)


@dataclass(frozen=True)
class Negative:
    kind: NegativeKind
    text: str
    sql: str


@dataclass
class NegativeSet:
    negatives: list[Negative] = field(default_factory=list)
    skips: list[tuple[NegativeKind, str]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Negative generation
# ---------------------------------------------------------------------------

_COMPARISON_SWAP = {">": "<", "<": ">", ">=": "<=", "<=": ">=", "=": "!=", "!=": "="}
_AGG_SWAP = {"MAX": "MIN", "MIN": "MAX"}
_BOOL_SWAP = {"AND": "OR", "OR": "AND"}
_SET_SWAP = {"UNION": "INTERSECT", "INTERSECT": "UNION"}


def _swap_tokens_stmt(stmt):
    """Apply the operator-alternates map to every occurrence at once."""
    changed = [False]

    def swap_expr(expr):
        if isinstance(expr, sqlast.AggExpr):
            fn = _AGG_SWAP.get(expr.fn, expr.fn)
            if fn != expr.fn:
                changed[0] = True
            return sqlast.AggExpr(fn, swap_expr(expr.arg), expr.distinct)
        if isinstance(expr, sqlast.ArithExpr):
            return sqlast.ArithExpr(expr.op, swap_expr(expr.left), swap_expr(expr.right))
        if isinstance(expr, sqlast.Subquery):
            return sqlast.Subquery(walk(expr.statement))
        return expr

    def swap_cond(cond):
        if cond is None:
            return None
        if isinstance(cond, sqlast.Comparison):
            op = _COMPARISON_SWAP.get(cond.op, cond.op)
            if op != cond.op:
                changed[0] = True
            return sqlast.Comparison(op, swap_expr(cond.left), swap_expr(cond.right))
        if isinstance(cond, sqlast.LikePredicate):
            changed[0] = True
            return sqlast.LikePredicate(swap_expr(cond.left), swap_expr(cond.pattern),
                                        not cond.negated)
        if isinstance(cond, sqlast.InPredicate):
            changed[0] = True
            return sqlast.InPredicate(swap_expr(cond.left), swap_expr(cond.right),
                                      not cond.negated)
        if isinstance(cond, sqlast.BetweenPredicate):
            return sqlast.BetweenPredicate(swap_expr(cond.left), swap_expr(cond.low),
                                           swap_expr(cond.high))
        if isinstance(cond, sqlast.NotCondition):
            return sqlast.NotCondition(swap_cond(cond.inner))
        if isinstance(cond, sqlast.BoolCondition):
            changed[0] = True
            return sqlast.BoolCondition(_BOOL_SWAP[cond.op],
                                        swap_cond(cond.left), swap_cond(cond.right))
        raise TypeError(f"unknown condition {cond!r}")

    def walk(node):
        if isinstance(node, sqlast.SetOperation):
            op = _SET_SWAP.get(node.op, node.op)
            if op != node.op:
                changed[0] = True
            return sqlast.SetOperation(op, walk(node.left), walk(node.right))
        order_by = node.order_by
        if order_by is not None:
            direction = "DESC" if order_by.direction == "ASC" else "ASC"
            changed[0] = True
            order_by = sqlast.OrderBy(direction,
                                      tuple(swap_expr(k) for k in order_by.keys))
        sources = tuple(
            sqlast.TableSource(s.table, sqlast.Subquery(walk(s.subquery.statement))
                               if s.subquery else None)
            for s in node.sources)
        return sqlast.SelectStatement(
            items=tuple(swap_expr(e) for e in node.items),
            sources=sources,
            distinct=node.distinct,
            on_conditions=node.on_conditions,  # join conditions stay untouched
            where=swap_cond(node.where),
            group_by=tuple(swap_expr(e) for e in node.group_by),
            having=swap_cond(node.having),
            order_by=order_by,
            limit=node.limit,
        )

    return walk(stmt), changed[0]


def _swap_values_stmt(stmt, schema: Schema, rng: random.Random,
                      require_different: bool = True):
    """Replace every comparison literal with a value drawn from its column's
    database contents (a *different* one when ``require_different``);
    literals stay put when the column offers nothing suitable."""
    changed = [False]
    can_sample = schema is not None and schema.db_path is not None

    def fresh_literal(column: sqlast.ColumnRef, literal: sqlast.Literal):
        if not can_sample or column.table is None or column.column == "*":
            return literal
        try:
            values = sample_column_values(
                schema, (column.table, column.column), k=16,
                seed=rng.randrange(2 ** 31))
        except CorpusError:
            return literal
        for value in values:
            if require_different and str(value) == str(literal.value):
                continue
            if str(value) != str(literal.value):
                changed[0] = True
            if isinstance(value, (int, float)):
                return sqlast.Literal(value, repr(value))
            return sqlast.Literal(str(value), "'" + str(value) + "'")
        return literal

    def swap_cond(cond):
        if cond is None:
            return None
        if isinstance(cond, sqlast.Comparison):
            if isinstance(cond.left, sqlast.ColumnRef) and isinstance(cond.right, sqlast.Literal):
                return sqlast.Comparison(cond.op, cond.left,
                                         fresh_literal(cond.left, cond.right))
            if isinstance(cond.right, sqlast.Subquery):
                return sqlast.Comparison(cond.op, cond.left,
                                         sqlast.Subquery(walk(cond.right.statement)))
            return cond
        if isinstance(cond, sqlast.BetweenPredicate):
            if isinstance(cond.left, sqlast.ColumnRef):
                low, high = cond.low, cond.high
                if isinstance(low, sqlast.Literal):
                    low = fresh_literal(cond.left, low)
                if isinstance(high, sqlast.Literal):
                    high = fresh_literal(cond.left, high)
                return sqlast.BetweenPredicate(cond.left, low, high)
            return cond
        if isinstance(cond, sqlast.InPredicate):
            if isinstance(cond.left, sqlast.ColumnRef) and isinstance(cond.right, sqlast.ValueList):
                items = tuple(fresh_literal(cond.left, lit) for lit in cond.right.items)
                return sqlast.InPredicate(cond.left, sqlast.ValueList(items), cond.negated)
            if isinstance(cond.right, sqlast.Subquery):
                return sqlast.InPredicate(cond.left,
                                          sqlast.Subquery(walk(cond.right.statement)),
                                          cond.negated)
            return cond
        if isinstance(cond, sqlast.NotCondition):
            return sqlast.NotCondition(swap_cond(cond.inner))
        if isinstance(cond, sqlast.BoolCondition):
            return sqlast.BoolCondition(cond.op, swap_cond(cond.left), swap_cond(cond.right))
        return cond

    def walk(node):
        if isinstance(node, sqlast.SetOperation):
            return sqlast.SetOperation(node.op, walk(node.left), walk(node.right))
        sources = tuple(
            sqlast.TableSource(s.table, sqlast.Subquery(walk(s.subquery.statement))
                               if s.subquery else None)
            for s in node.sources)
        return sqlast.SelectStatement(
            items=node.items,
            sources=sources,
            distinct=node.distinct,
            on_conditions=node.on_conditions,
            where=swap_cond(node.where),
            group_by=node.group_by,
            having=swap_cond(node.having),
            order_by=node.order_by,
            limit=node.limit,
        )

    return walk(stmt), changed[0]


def _drop_tokens(tokens: Sequence[str], rng: random.Random,
                 probability: float = 0.3, max_tries: int = 64) -> Optional[list[str]]:
    if len(tokens) < 2:
        return None
    for _ in range(max_tries):
        kept = [t for t in tokens if rng.random() >= probability]
        if 0 < len(kept) < len(tokens):
            return kept
    return None


def _shuffle_span(tokens: Sequence[str], rng: random.Random,
                  span_fraction: float = 0.3, max_tries: int = 64) -> Optional[list[str]]:
    n = len(tokens)
    if n < 2:
        return None
    span = max(2, round(span_fraction * n))
    span = min(span, n)
    for _ in range(max_tries):
        start = rng.randrange(0, n - span + 1)
        window = list(tokens[start:start + span])
        rng.shuffle(window)
        if window != list(tokens[start:start + span]):
            return list(tokens[:start]) + window + list(tokens[start + span:])
    return None


def gen_negatives(example: ParallelExample, schema: Optional[Schema],
                  pool: Sequence[str], seed: int) -> NegativeSet:
    """Six perturbed (text, sql) pairs for one positive, in fixed kind order.

    Deterministic for a given seed. Degenerate inputs (no literals, no
    swappable operators, empty pool, too-short text) produce reported skips
    rather than silent copies of the positive.
    """
    rng = random.Random(seed)
    result = NegativeSet()
    try:
        stmt = parse_statement(example.sql, schema)
    except SqlParseError as exc:
        for kind in KIND_ORDER:
            result.skips.append((kind, f"positive does not parse: {exc}"))
        return result

    value_rng = random.Random(rng.randrange(2 ** 31))
    swapped_values, values_changed = _swap_values_stmt(stmt, schema, value_rng)
    if values_changed:
        result.negatives.append(Negative(
            NegativeKind.VALUE_SWAP, example.question, render_sql(swapped_values)))
    else:
        result.skips.append((NegativeKind.VALUE_SWAP,
                             "no literal could be replaced from its column"))

    swapped_tokens, tokens_changed = _swap_tokens_stmt(stmt)
    if tokens_changed:
        result.negatives.append(Negative(
            NegativeKind.TOKEN_SWAP, example.question, render_sql(swapped_tokens)))
    else:
        result.skips.append((NegativeKind.TOKEN_SWAP, "no swappable operator"))

    if values_changed or tokens_changed:
        cascaded, _ = _swap_tokens_stmt(swapped_values)
        result.negatives.append(Negative(
            NegativeKind.CASCADE, example.question, render_sql(cascaded)))
    else:
        result.skips.append((NegativeKind.CASCADE, "both component perturbations degenerate"))

    others = [q for q in pool if q != example.sql]
    if others:
        result.negatives.append(Negative(
            NegativeKind.SQL_SWAP, example.question, rng.choice(others)))
    else:
        result.skips.append((NegativeKind.SQL_SWAP, "no other SQL in the schema pool"))

    tokens = tokenize(example.question)
    dropped = _drop_tokens(tokens, rng)
    if dropped is not None:
        result.negatives.append(Negative(
            NegativeKind.TEXT_DROP, " ".join(dropped), example.sql))
    else:
        result.skips.append((NegativeKind.TEXT_DROP, "text too short to drop tokens"))

    shuffled = _shuffle_span(tokens, rng)
    if shuffled is not None:
        result.negatives.append(Negative(
            NegativeKind.TEXT_SHUFFLE, " ".join(shuffled), example.sql))
    else:
        result.skips.append((NegativeKind.TEXT_SHUFFLE,
                             "no span permutation changes the order"))
    return result


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

HASH_DIM = 2 ** 12

_CUE_GROUPS: tuple[tuple[str, frozenset[str]], ...] = (
    ("superlative_max", frozenset({
        "most", "largest", "highest", "maximum", "best", "top", "biggest",
        "greatest", "oldest", "longest", "latest"})),
    ("superlative_min", frozenset({
        "least", "smallest", "lowest", "minimum", "worst", "fewest",
        "youngest", "shortest", "earliest"})),
    ("compare_high", frozenset({
        "more", "greater", "above", "over", "higher", "older", "exceeds",
        "exceeding", "after", "later", "beyond"})),
    ("compare_low", frozenset({
        "less", "fewer", "under", "below", "lower", "younger", "before",
        "earlier"})),
    ("ordering", frozenset({
        "sorted", "ordered", "order", "alphabetical", "alphabetically",
        "ascending", "descending", "rank", "ranked"})),
    ("counting", frozenset({"many", "number", "count", "total", "amount"})),
    ("averaging", frozenset({"average", "mean"})),
    ("negation", frozenset({
        "not", "no", "without", "never", "exclude", "excluding", "except"})),
    ("grouping", frozenset({"each", "per", "grouped"})),
)

FEATURE_DIM = 1 + 3 + 1 + 3 * len(_CUE_GROUPS) + 3 + 2 * HASH_DIM
FEATURE_SCHEMA_VERSION = 1


def _stem(word: str) -> str:
    # crude plural folding so "heads" matches the "head" schema token
    if len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def _tree_labels(tree: RaNode) -> set[str]:
    return {node.value for node in sqlast.iter_nodes(tree)}


def _sql_cue_flags(tree: RaNode) -> dict[str, bool]:
    labels = _tree_labels(tree)
    has_limit = "LIMIT" in labels
    return {
        "superlative_max": ("ORDERBY_DESC" in labels and has_limit) or "MAX" in labels,
        "superlative_min": ("ORDERBY_ASC" in labels and has_limit) or "MIN" in labels,
        "compare_high": bool(labels & {">", ">="}),
        "compare_low": bool(labels & {"<", "<="}),
        "ordering": bool(labels & {"ORDERBY_ASC", "ORDERBY_DESC"}),
        "counting": bool(labels & {"COUNT", "SUM"}),
        "averaging": "AVG" in labels,
        "negation": bool(labels & {"!=", "NOT", "NOT_IN", "NOT_LIKE", "EXCEPT"}),
        "grouping": "GROUPBY" in labels,
    }


def _span_words(pseudo: PseudoSql, kind: str) -> set[str]:
    words: set[str] = set()
    for text in pseudo.spans_of_kind(kind):
        for part in text.replace("_", " ").split():
            norm = _stem(normalize_token(part))
            if norm:
                words.add(norm)
    return words


def _hash_index(word: str) -> int:
    digest = hashlib.md5(word.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") % HASH_DIM


def featurize(x: str, q: RaNode, pseudo: PseudoSql,
              table: SchemaFrequencyTable) -> np.ndarray:
    """Fixed-order feature vector for a (text, SQL) pair; dimension is
    constant across inputs and empty text maps to the bias channel alone."""
    phi = np.zeros(FEATURE_DIM, dtype=np.float64)
    phi[0] = 1.0
    # sequence features keep punctuation tokens (word order and token drops
    # must be visible); set features use the normalized words only
    x_tokens = [normalize_token(t) or t for t in tokenize(x)]
    x_set = {normalize_token(t) for t in tokenize(x)} - {""}
    x_stems = {_stem(t) for t in x_set}
    if not x_tokens:
        return phi

    offset = 1
    for i, kind in enumerate(("table", "column", "value")):
        words = _span_words(pseudo, kind)
        if words:
            phi[offset + i] = len(words & x_stems) / len(words)
    offset += 3

    x_lower = x.lower()
    matches = 0
    for value in pseudo.spans_of_kind("value"):
        norm = normalize_token(value)
        if (norm and norm in x_set) or (value and value.lower() in x_lower):
            matches += 1
    phi[offset] = float(matches)
    offset += 1

    flags = _sql_cue_flags(q)
    for i, (name, cues) in enumerate(_CUE_GROUPS):
        cue_present = bool(x_set & cues)
        phi[offset + 3 * i] = 1.0 if cue_present and flags[name] else 0.0
        phi[offset + 3 * i + 1] = 1.0 if cue_present and not flags[name] else 0.0
        phi[offset + 3 * i + 2] = 1.0 if flags[name] and not cue_present else 0.0
    offset += 3 * len(_CUE_GROUPS)

    pseudo_tokens = pseudo.stripped().split()
    phi[offset] = min(len(x_tokens) / max(1, len(pseudo_tokens)), 4.0)
    offset += 1

    words = [t for t in x_tokens if t in x_set]
    specific = [t for t in words if table.fraction(t) < 0.5]
    if words:
        phi[offset] = len(specific) / len(words)
    offset += 1

    # how many of the text's schema-specific words the SQL accounts for; a
    # swapped-in SQL from the same schema fails to explain them
    if specific:
        span_words = (_span_words(pseudo, "table") | _span_words(pseudo, "column")
                      | _span_words(pseudo, "value"))
        explained = sum(1 for t in specific if _stem(t) in span_words)
        phi[offset] = explained / len(specific)
    offset += 1

    weight = 1.0 / len(x_tokens)
    for token in x_tokens:
        phi[offset + _hash_index(token)] += weight
    offset += HASH_DIM

    # hashed bigrams make the features word-order sensitive, so shuffled or
    # truncated texts separate from their originals
    if len(x_tokens) > 1:
        weight = 1.0 / (len(x_tokens) - 1)
        for left, right in zip(x_tokens, x_tokens[1:]):
            phi[offset + _hash_index(f"{left}|{right}")] += weight
    return phi


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def sigmoid(z: float) -> float:
    return float(1.0 / (1.0 + np.exp(-np.clip(z, -500, 500))))


def _log_sigmoid(z) -> np.ndarray:
    # log σ(z) = -log(1 + exp(-z)), computed stably
    return -np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


def loss_bce(s_pos: float, s_negs: Sequence[float], conventional: bool = False) -> float:
    """Per-group binary cross-entropy: the positive pushed through σ toward
    1, each negative score s_j penalized through σ(1 - s_j) (as printed); the
    ``conventional`` flag uses 1 - σ(s_j) instead."""
    s_negs = np.asarray(s_negs, dtype=np.float64)
    positive = -_log_sigmoid(s_pos)
    if conventional:
        negatives = -_log_sigmoid(-s_negs)
    else:
        negatives = -_log_sigmoid(1.0 - s_negs)
    return float(positive + negatives.sum())


def loss_bce_grad(s_pos: float, s_negs: Sequence[float],
                  conventional: bool = False) -> tuple[float, np.ndarray]:
    s_negs = np.asarray(s_negs, dtype=np.float64)
    d_pos = sigmoid(s_pos) - 1.0
    if conventional:
        d_negs = 1.0 / (1.0 + np.exp(-s_negs))       # σ(s_j)
    else:
        d_negs = 1.0 / (1.0 + np.exp(1.0 - s_negs))  # σ(s_j - 1)
    return d_pos, d_negs


def loss_xent(s_pos: float, s_negs: Sequence[float]) -> float:
    """Softmax contrast of the positive against its own negatives."""
    scores = np.concatenate(([s_pos], np.asarray(s_negs, dtype=np.float64)))
    shifted = scores - scores.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[0])


def loss_xent_grad(s_pos: float, s_negs: Sequence[float]) -> tuple[float, np.ndarray]:
    scores = np.concatenate(([s_pos], np.asarray(s_negs, dtype=np.float64)))
    shifted = np.exp(scores - scores.max())
    p = shifted / shifted.sum()
    return float(p[0] - 1.0), p[1:]


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

def _sparsify(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Compact (indices, values) form; feature vectors are ~50/8000 dense."""
    idx = np.nonzero(phi)[0]
    return idx, phi[idx]


@dataclass
class FilterModel:
    weights: np.ndarray
    bias: float = 0.0
    feature_version: int = FEATURE_SCHEMA_VERSION

    def score_features(self, phi: np.ndarray) -> float:
        return float(self.weights @ phi + self.bias)

    def score_sparse(self, sparse: tuple[np.ndarray, np.ndarray]) -> float:
        idx, vals = sparse
        return float(self.weights[idx] @ vals + self.bias)

    def score(self, x: str, q: RaNode, pseudo: PseudoSql,
              table: SchemaFrequencyTable) -> float:
        return self.score_features(featurize(x, q, pseudo, table))

    def save(self, path: str | Path) -> None:
        payload = {
            "feature_version": self.feature_version,
            "bias": self.bias,
            "weights": self.weights.tolist(),
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FilterModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("feature_version") != FEATURE_SCHEMA_VERSION:
            raise CorpusError(
                f"filter model has feature version {payload.get('feature_version')!r}; "
                f"this build expects {FEATURE_SCHEMA_VERSION}")
        weights = np.asarray(payload["weights"], dtype=np.float64)
        return cls(weights=weights, bias=float(payload["bias"]))


@dataclass
class TrainingReport:
    epoch_losses: list[float] = field(default_factory=list)
    groups: int = 0
    skipped_examples: int = 0
    negative_skips: int = 0


@dataclass
class _Group:
    positive: tuple[np.ndarray, np.ndarray]  # sparse (indices, values)
    negatives: list[tuple[np.ndarray, np.ndarray]]


def build_training_groups(examples: Sequence[ParallelExample],
                          schemas: dict[str, Schema],
                          table: SchemaFrequencyTable,
                          seed: int) -> tuple[list[_Group], TrainingReport]:
    """Featurized (positive, negatives) groups for every example with at
    least one generable negative. Features are stored sparsely so corpora of
    tens of thousands of rows stay in memory."""
    pools: dict[str, list[str]] = {}
    for example in examples:
        pools.setdefault(example.db_id, []).append(example.sql)
    rng = random.Random(seed)
    groups: list[_Group] = []
    report = TrainingReport()
    for example in examples:
        schema = schemas.get(example.db_id)
        try:
            tree = sqlast.parse_sql(example.sql, schema)
        except SqlParseError:
            report.skipped_examples += 1
            continue
        pseudo = to_pseudo_english(tree)
        negative_set = gen_negatives(example, schema, pools[example.db_id],
                                     rng.randrange(2 ** 31))
        report.negative_skips += len(negative_set.skips)
        if not negative_set.negatives:
            report.skipped_examples += 1
            continue
        positive = _sparsify(featurize(example.question, tree, pseudo, table))
        negatives = []
        for negative in negative_set.negatives:
            try:
                neg_tree = sqlast.parse_sql(negative.sql, schema)
            except SqlParseError:
                continue
            neg_pseudo = to_pseudo_english(neg_tree)
            negatives.append(_sparsify(
                featurize(negative.text, neg_tree, neg_pseudo, table)))
        if not negatives:
            report.skipped_examples += 1
            continue
        groups.append(_Group(positive, negatives))
    report.groups = len(groups)
    return groups, report


def train_filter(examples: Sequence[ParallelExample],
                 schemas: dict[str, Schema],
                 table: SchemaFrequencyTable,
                 epochs: int = 12,
                 learning_rate: float = 0.5,
                 seed: int = 0,
                 conventional_bce: bool = False) -> tuple[FilterModel, TrainingReport]:
    """SGD over per-group loss_bce + loss_xent with seeded shuffling;
    deterministic for a given seed."""
    groups, report = build_training_groups(examples, schemas, table, seed)
    if not groups:
        raise CorpusError("no trainable (positive, negatives) groups")
    model = FilterModel(weights=np.zeros(FEATURE_DIM), bias=0.0)
    rng = random.Random(seed + 1)
    order = list(range(len(groups)))
    for _epoch in range(epochs):
        rng.shuffle(order)
        total = 0.0
        for gi in order:
            group = groups[gi]
            s_pos = model.score_sparse(group.positive)
            s_negs = [model.score_sparse(sparse) for sparse in group.negatives]
            total += loss_bce(s_pos, s_negs, conventional_bce) + loss_xent(s_pos, s_negs)
            b_pos, b_negs = loss_bce_grad(s_pos, s_negs, conventional_bce)
            x_pos, x_negs = loss_xent_grad(s_pos, s_negs)
            d_pos = b_pos + x_pos
            idx, vals = group.positive
            np.subtract.at(model.weights, idx, learning_rate * d_pos * vals)
            model.bias -= learning_rate * d_pos
            for (idx, vals), db, dx in zip(group.negatives, b_negs, x_negs):
                d_neg = db + dx
                np.subtract.at(model.weights, idx, learning_rate * d_neg * vals)
                model.bias -= learning_rate * d_neg
        report.epoch_losses.append(total / len(groups))
    return model, report


def ranking_accuracy(model: FilterModel, groups: Sequence[_Group]) -> float:
    """Fraction of groups where the positive outscores all its negatives."""
    if not groups:
        raise ValueError("no groups to evaluate")
    wins = 0
    for group in groups:
        s_pos = model.score_sparse(group.positive)
        if all(s_pos > model.score_sparse(sparse) for sparse in group.negatives):
            wins += 1
    return wins / len(groups)


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

class RemoteScorer:
    """Scoring over the same HTTP shape as the fill protocol, so a remote
    neural classifier can stand in for the linear model: POST /score with
    {text, sql, pseudo} returns {score}. Interchangeable with FilterModel
    wherever a .score(...) is expected."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries

    def score(self, x: str, q: RaNode, pseudo: PseudoSql,
              table: SchemaFrequencyTable) -> float:
        import time

        import requests

        from .errors import TransportError

        payload = {"text": x, "pseudo": pseudo.to_json()}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = requests.post(self.endpoint + "/score", json=payload,
                                         timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(0.05 * (attempt + 1))
                continue
            if 500 <= response.status_code < 600:
                last_error = TransportError(
                    f"scoring service returned {response.status_code}")
                if attempt < self.retries:
                    time.sleep(0.05 * (attempt + 1))
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"scoring service returned {response.status_code}")
            try:
                return float(response.json()["score"])
            except (ValueError, KeyError, TypeError) as exc:
                raise TransportError(f"malformed scoring response: {exc}") from exc
        raise TransportError(f"scoring service unreachable: {last_error}")


@dataclass(frozen=True)
class ScoringContext:
    """Everything the model needs to score candidate texts for one SQL."""

    sql: str
    tree: RaNode
    pseudo: PseudoSql
    table: SchemaFrequencyTable


@dataclass(frozen=True)
class ScoredCandidate:
    text: str
    score: float
    probability: float


def select_and_filter(candidates, context: ScoringContext, model: FilterModel,
                      top_k: int = 5, threshold: float = 0.5) -> list[ScoredCandidate]:
    """Dedupe, score, keep the top_k, then drop candidates whose sigmoid
    score falls below the threshold. Stable order: score descending, text
    ascending."""
    if not candidates:
        raise ValueError("no candidates to filter")
    seen: set[str] = set()
    scored: list[ScoredCandidate] = []
    for candidate in candidates:
        text = " ".join(candidate.text.split())
        if text in seen:
            continue
        seen.add(text)
        score = model.score(text, context.tree, context.pseudo, context.table)
        scored.append(ScoredCandidate(text, score, sigmoid(score)))
    scored.sort(key=lambda c: (-c.score, c.text))
    kept = scored[:top_k]
    return [c for c in kept if c.probability >= threshold]
