"""Turn (masked template, SQL) into candidate question texts.

Two backends share one request shape: a deterministic heuristic that
substitutes wrapped span tokens into MASK slots (keeps the pipeline
runnable and testable with no model service), and a remote client speaking
the fill protocol (JSON over HTTP) to an out-of-process seq2seq model.

This module also builds the three-way training mixture that external
trainers consume: plain template refilling, SQL-only generation, and
cross-schema template transfer.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import requests

from .corpus import ParallelExample
from .errors import SqlParseError, TransportError
from .masking import MASK, MaskedTemplate, mask_frequency, tokenize
from .retrieval import NeighborIndex
from .sql2eng import CLOSE, OPEN, PseudoSql

__all__ = [
    "SEPARATOR",
    "FillRequest",
    "FillCandidate",
    "TrainingRecord",
    "MixtureResult",
    "concat_input",
    "heuristic_fill",
    "remote_fill",
    "word_edit_distance",
    "find_cross_schema_template",
    "build_training_mixture",
    "write_training_mixture_jsonl",
]

SEPARATOR = "⟨SEP⟩"  # ⟨SEP⟩
MAX_CANDIDATES = 32
MODES = ("naive", "sql_only", "cross_schema")


@dataclass(frozen=True)
class FillRequest:
    pseudo: PseudoSql
    template: Optional[MaskedTemplate] = None
    num_candidates: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.num_candidates <= MAX_CANDIDATES):
            raise ValueError(f"num_candidates must be in [1, {MAX_CANDIDATES}]")

    def to_json(self) -> dict:
        return {
            "template_tokens": list(self.template.tokens) if self.template else None,
            "pseudo": self.pseudo.to_json(),
            "num_candidates": self.num_candidates,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FillCandidate:
    text: str
    backend_score: float = 0.0

    def __post_init__(self):
        if not self.text:
            raise ValueError("candidate text is empty")
        if MASK in self.text.split() or OPEN in self.text or CLOSE in self.text:
            raise ValueError(f"candidate leaks markers: {self.text!r}")


def concat_input(template: Optional[MaskedTemplate], pseudo: PseudoSql) -> str:
    """Serialize the encoder input; the two halves split back apart on the
    separator token."""
    if template is None:
        return f"SQL: {pseudo.text}"
    return f"TEMPLATE: {template.text} {SEPARATOR} SQL: {pseudo.text}"


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def heuristic_fill(request: FillRequest) -> list[FillCandidate]:
    """Deterministic fallback backend.

    MASK slots are filled left to right with the wrapped span tokens of the
    pseudo rendering (tables first, then columns, then values, cycling);
    extra candidates rotate the starting span within each kind, so the
    variants of one template stay textually close, the way sampled decodes
    from a single template would. Without a template the candidate is the
    marker-stripped pseudo text.
    """
    pseudo = request.pseudo
    if request.template is None:
        text = _normalize_ws(pseudo.stripped())
        return [FillCandidate(text)]

    pool = [span for span in (pseudo.spans_of_kind("table")
                              + pseudo.spans_of_kind("column")
                              + pseudo.spans_of_kind("value"))
            if span != "*"]  # the star column is not a usable text token
    tokens = request.template.tokens
    slots = [i for i, token in enumerate(tokens) if token == MASK]

    def render(assignment: dict[int, str]) -> str:
        filled = [assignment.get(i, token) for i, token in enumerate(tokens)
                  if not (token == MASK and i not in assignment)]
        return _normalize_ws(" ".join(filled))

    canonical = {slot: pool[j % len(pool)]
                 for j, slot in enumerate(slots)} if pool else {}
    assignments = [canonical]
    # later candidates advance a single slot through the pool, so the
    # variants of one template differ by one token, like sampled decodes
    for step in range(1, len(pool)):
        for j, slot in enumerate(slots):
            variant = dict(canonical)
            variant[slot] = pool[(j + step) % len(pool)]
            assignments.append(variant)

    candidates: list[FillCandidate] = []
    seen: set[str] = set()
    for assignment in assignments:
        text = render(assignment)
        if not text or text in seen:
            continue
        seen.add(text)
        candidates.append(FillCandidate(text))
        if len(candidates) == request.num_candidates:
            break
    return candidates


def remote_fill(request: FillRequest, endpoint: str,
                timeout: float = 30.0, retries: int = 2) -> list[FillCandidate]:
    """POST the fill protocol to a service; transient failures (connection
    errors, timeouts, 5xx) are retried up to ``retries`` times. Never falls
    back to the heuristic silently."""
    url = endpoint.rstrip("/") + "/fill"
    payload = request.to_json()
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        try:
            response = requests.post(url, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
            if attempt < retries:
                time.sleep(0.05 * (attempt + 1))
            continue
        if 500 <= response.status_code < 600:
            last_error = TransportError(
                f"fill service returned {response.status_code}")
            if attempt < retries:
                time.sleep(0.05 * (attempt + 1))
            continue
        if response.status_code != 200:
            raise TransportError(
                f"fill service returned {response.status_code}: {response.text[:200]}")
        try:
            body = response.json()
            raw = body["candidates"]
            return [FillCandidate(str(c["text"]), float(c.get("score", 0.0)))
                    for c in raw]
        except (ValueError, KeyError, TypeError) as exc:
            raise TransportError(f"malformed fill response: {exc}") from exc
    raise TransportError(f"fill service unreachable after {retries + 1} attempts: "
                         f"{last_error}")


def word_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance over token sequences (unit costs)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, token_a in enumerate(a, start=1):
        current = [i]
        for j, token_b in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (token_a != token_b),
            ))
        previous = current
    return previous[-1]


def find_cross_schema_template(
    example: ParallelExample,
    index: NeighborIndex,
    table,
    max_distance: float = 0.1,
    schema=None,
    _distance_cache: Optional[dict] = None,
) -> Optional[tuple[int, MaskedTemplate]]:
    """Best cross-schema template donor for a training example: among index
    entries with normalized distance < ``max_distance`` from a different
    schema, the one whose masked question is closest in word edit distance
    to the example's own masked question (ties by example id)."""
    from .retrieval import fingerprint
    from .sqlast import anonymize, parse_sql, tree_size
    from .ted import ted as _ted

    try:
        probe_tree = parse_sql(example.sql, schema)
    except SqlParseError:
        return None
    probe_anon = anonymize(probe_tree)
    probe_size = tree_size(probe_tree)
    probe_fp = fingerprint(probe_tree)
    cache = _distance_cache if _distance_cache is not None else {}

    own_masked = mask_frequency(example.question, table)
    best: Optional[tuple[int, int, MaskedTemplate]] = None  # (wed, id, template)
    for entry in index.entries:
        if entry.db_id == example.db_id:
            continue
        if entry.fingerprint == probe_fp:
            distance = 0.0
        else:
            larger = max(probe_size, entry.size)
            if abs(probe_size - entry.size) / larger >= max_distance:
                continue
            key = (min(probe_fp, entry.fingerprint), max(probe_fp, entry.fingerprint),
                   larger)
            if key not in cache:
                cache[key] = _ted(probe_anon, entry.anonymized) / larger
            distance = cache[key]
        if distance >= max_distance:
            continue
        donor = mask_frequency(entry.question, table,
                               source_example_id=entry.example_id,
                               source_db_id=entry.db_id)
        wed = word_edit_distance(own_masked.tokens, donor.tokens)
        candidate = (wed, entry.example_id, donor)
        if best is None or candidate[:2] < best[:2]:
            best = candidate
    if best is None:
        return None
    return best[1], best[2]


@dataclass(frozen=True)
class TrainingRecord:
    mode: str  # naive | sql_only | cross_schema
    input: str
    target: str
    meta: dict

    def to_json(self) -> dict:
        return {"mode": self.mode, "input": self.input,
                "target": self.target, "meta": self.meta}


@dataclass
class MixtureResult:
    records: list[TrainingRecord] = field(default_factory=list)
    fallback_count: int = 0
    skipped_unparseable: int = 0

    def mode_counts(self) -> dict[str, int]:
        counts = {mode: 0 for mode in MODES}
        for record in self.records:
            counts[record.mode] += 1
        return counts


def build_training_mixture(examples: Sequence[ParallelExample],
                           index: NeighborIndex,
                           table,
                           seed: int,
                           schemas: Optional[dict] = None) -> MixtureResult:
    """Emit one training record per parseable example, the three modes split
    evenly (a seeded balanced partition: counts differ by at most one).

    cross_schema falls back to naive when no donor qualifies; the fallback
    count is reported so the mixture proportions can be audited.
    """
    by_id = {entry.example_id: entry for entry in index.entries}
    order = list(range(len(examples)))
    random.Random(seed).shuffle(order)
    assigned = {row: MODES[slot % len(MODES)] for slot, row in enumerate(order)}

    from .sql2eng import to_pseudo_english

    result = MixtureResult()
    cache: dict = {}
    for row, example in enumerate(examples):
        entry = by_id.get(row)
        if entry is None:
            result.skipped_unparseable += 1
            continue
        pseudo = to_pseudo_english(entry.tree)
        mode = assigned[row]
        meta = {"example_id": row}
        if mode == "sql_only":
            record_input = concat_input(None, pseudo)
        elif mode == "naive":
            masked = mask_frequency(example.question, table)
            record_input = concat_input(masked, pseudo)
        else:  # cross_schema
            schema = schemas.get(example.db_id) if schemas else None
            found = find_cross_schema_template(
                example, index, table, schema=schema, _distance_cache=cache)
            if found is None:
                mode = "naive"
                result.fallback_count += 1
                masked = mask_frequency(example.question, table)
                record_input = concat_input(masked, pseudo)
            else:
                paired_id, donor = found
                meta["paired_example_id"] = paired_id
                record_input = concat_input(donor, pseudo)
        result.records.append(TrainingRecord(mode, record_input, example.question, meta))
    return result


def write_training_mixture_jsonl(result: MixtureResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in result.records:
            handle.write(json.dumps(record.to_json(), ensure_ascii=False,
                                    sort_keys=True) + "\n")
