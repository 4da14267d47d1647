"""Structural nearest-neighbor retrieval over a parsed SQL corpus.

A brute-force scan with a fingerprint shortcut: the anonymized tree of each
entry is hashed, so structurally identical queries are found without
computing any distance. Spider-scale corpora (~7k entries, small trees)
retrieve in well under a second per probe.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import ParallelExample, QuarantinedRow, Schema
from .errors import CorpusError, SqlParseError
from .sqlast import LeafKind, RaNode, anonymize, parse_sql, tree_size

__all__ = [
    "IndexEntry",
    "NeighborIndex",
    "RetrievalResult",
    "NeighborStats",
    "build_index",
    "retrieve",
    "neighbor_stats",
    "save_index",
    "load_index",
]

INDEX_FORMAT_VERSION = 1


def fingerprint(tree: RaNode) -> str:
    """Hash of the canonical serialization of the anonymized tree; equal
    fingerprints imply equal anonymized trees."""
    return hashlib.sha256(
        _serialize_tree(anonymize(tree)).encode("utf-8")).hexdigest()


def _serialize_tree(tree: RaNode) -> str:
    kind = tree.leaf_kind.value if tree.leaf_kind else ""
    inner = ",".join(_serialize_tree(c) for c in tree.children)
    return f"({tree.value!r}|{kind}[{inner}])"


def _tree_to_json(tree: RaNode):
    return [tree.value, tree.leaf_kind.value if tree.leaf_kind else None,
            [_tree_to_json(c) for c in tree.children]]


def _tree_from_json(payload) -> RaNode:
    value, kind, children = payload
    return RaNode(value, tuple(_tree_from_json(c) for c in children),
                  LeafKind(kind) if kind else None)


@dataclass(frozen=True)
class IndexEntry:
    example_id: int
    db_id: str
    question: str
    sql: str
    tree: RaNode
    anonymized: RaNode
    size: int
    fingerprint: str


@dataclass
class NeighborIndex:
    entries: list[IndexEntry]
    quarantine: list[QuarantinedRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def coverage(self) -> float:
        total = len(self.entries) + len(self.quarantine)
        return len(self.entries) / total if total else 1.0

    def by_fingerprint(self) -> dict[str, list[IndexEntry]]:
        groups: dict[str, list[IndexEntry]] = {}
        for entry in self.entries:
            groups.setdefault(entry.fingerprint, []).append(entry)
        return groups


@dataclass(frozen=True)
class RetrievalResult:
    example_id: int
    distance: float


def build_index(examples: Sequence[ParallelExample],
                schemas: Optional[dict[str, Schema]] = None) -> NeighborIndex:
    """Parse every example and index it; unparseable rows are quarantined.

    Entries keep the input order, so example ids are stable row indices.
    """
    index = NeighborIndex(entries=[])
    for row, example in enumerate(examples):
        schema = schemas.get(example.db_id) if schemas else None
        try:
            tree = parse_sql(example.sql, schema)
        except SqlParseError as exc:
            index.quarantine.append(QuarantinedRow(row, str(exc), example.sql))
            continue
        anon = anonymize(tree)
        index.entries.append(IndexEntry(
            example_id=row,
            db_id=example.db_id,
            question=example.question,
            sql=example.sql,
            tree=tree,
            anonymized=anon,
            size=tree_size(tree),
            fingerprint=fingerprint(tree),
        ))
    return index


def retrieve(index: NeighborIndex, probe_sql: RaNode, probe_db: str,
             max_distance: float = 0.1, limit: int = 10,
             exclude_db: Optional[str] = None) -> list[RetrievalResult]:
    """All entries at normalized distance strictly below ``max_distance``,
    sorted by (distance, example_id) and truncated to ``limit``."""
    from .ted import ted as _ted  # local import keeps module load cheap

    if max_distance < 0:
        raise ValueError("max_distance must be >= 0")
    probe_anon = anonymize(probe_sql)
    probe_size = tree_size(probe_sql)
    probe_fp = fingerprint(probe_sql)
    results: list[RetrievalResult] = []
    for entry in index.entries:
        if exclude_db is not None and entry.db_id == exclude_db:
            continue
        if entry.fingerprint == probe_fp:
            distance = 0.0
        else:
            larger = max(probe_size, entry.size)
            # cheapest possible edit is one 0.5 rename
            if 0.5 / larger >= max_distance:
                continue
            distance = _ted(probe_anon, entry.anonymized) / larger
        if distance < max_distance:
            results.append(RetrievalResult(entry.example_id, distance))
    results.sort(key=lambda r: (r.distance, r.example_id))
    return results[:limit]


@dataclass
class NeighborStats:
    """Histogram of per-entry mean distance to the k nearest cross-schema
    neighbors, plus the fraction of entries with >= k zero-distance ones."""

    k: int
    bin_width: float
    histogram: list[tuple[float, float, int]]  # (bin_low, bin_high, count)
    zero_neighbor_fraction: float
    mean_distances: list[float]

    def to_csv(self) -> str:
        lines = ["bin_low,bin_high,count"]
        for low, high, count in self.histogram:
            lines.append(f"{low:.2f},{high:.2f},{count}")
        return "\n".join(lines) + "\n"


def neighbor_stats(index: NeighborIndex, k: int = 3,
                   bin_width: float = 0.02) -> NeighborStats:
    """Average distance to the k nearest neighbors from other schemas, for
    every entry in the index."""
    from .ted import ted as _ted

    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index.entries) <= k:
        raise CorpusError(f"index has {len(index.entries)} entries; need more than {k}")

    # Distances depend only on the anonymized tree, so compute per distinct
    # fingerprint and fan back out to entries.
    groups = index.by_fingerprint()
    shapes = sorted(groups)  # deterministic order
    shape_entry = {fp: groups[fp][0] for fp in shapes}
    # cross-schema twin count per (fingerprint, db_id)
    twins: dict[str, dict[str, int]] = {}
    for fp in shapes:
        per_db: dict[str, int] = {}
        for entry in groups[fp]:
            per_db[entry.db_id] = per_db.get(entry.db_id, 0) + 1
        twins[fp] = per_db

    pair_cache: dict[tuple[str, str], float] = {}

    def shape_distance(fp_a: str, fp_b: str) -> float:
        key = (fp_a, fp_b) if fp_a <= fp_b else (fp_b, fp_a)
        if key not in pair_cache:
            a, b = shape_entry[key[0]], shape_entry[key[1]]
            pair_cache[key] = _ted(a.anonymized, b.anonymized) / max(a.size, b.size)
        return pair_cache[key]

    mean_distances: list[float] = []
    zero_count = 0
    for entry in index.entries:
        per_db = twins[entry.fingerprint]
        cross_twins = sum(n for db, n in per_db.items() if db != entry.db_id)
        if cross_twins >= k:
            zero_count += 1
            mean_distances.append(0.0)
            continue
        # collect the k smallest distances; twins contribute zeros
        needed = k - cross_twins
        best: list[float] = []
        candidates = []
        available = cross_twins
        for fp in shapes:
            if fp == entry.fingerprint:
                continue
            other = shape_entry[fp]
            count = sum(n for db, n in twins[fp].items() if db != entry.db_id)
            if count == 0:
                continue
            available += count
            lower_bound = abs(entry.size - other.size) / max(entry.size, other.size)
            candidates.append((lower_bound, fp, count))
        if available < k:
            raise CorpusError(
                f"entry {entry.example_id} has only {available} cross-schema "
                f"neighbors; need at least k={k}")
        candidates.sort()
        for lower_bound, fp, count in candidates:
            if len(best) >= needed and lower_bound >= best[needed - 1]:
                break
            distance = shape_distance(entry.fingerprint, fp)
            for _ in range(min(count, needed)):
                best.append(distance)
            best.sort()
            best = best[:needed]
        mean = sum(best[:needed]) / k  # cross-schema twins add zeros
        mean_distances.append(mean)

    zero_neighbor_fraction = zero_count / len(index.entries)
    max_bin = max(mean_distances) if mean_distances else 0.0
    bins = int(max_bin / bin_width) + 1
    counts = [0] * bins
    for value in mean_distances:
        counts[min(int(value / bin_width), bins - 1)] += 1
    histogram = [(i * bin_width, (i + 1) * bin_width, counts[i]) for i in range(bins)]
    return NeighborStats(k, bin_width, histogram, zero_neighbor_fraction, mean_distances)


def save_index(index: NeighborIndex, path: str | Path) -> None:
    payload = {
        "version": INDEX_FORMAT_VERSION,
        "entries": [
            {
                "example_id": e.example_id,
                "db_id": e.db_id,
                "question": e.question,
                "sql": e.sql,
                "tree": _tree_to_json(e.tree),
            }
            for e in index.entries
        ],
        "quarantine": [
            {"row": q.row, "reason": q.reason, "payload": q.payload}
            for q in index.quarantine
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=False)


def load_index(path: str | Path) -> NeighborIndex:
    path = Path(path)
    if not path.exists():
        raise CorpusError("index snapshot not found", path=str(path))
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("version") != INDEX_FORMAT_VERSION:
        raise CorpusError(
            f"unsupported index version {payload.get('version')!r}", path=str(path))
    entries = []
    for item in payload["entries"]:
        tree = _tree_from_json(item["tree"])
        entries.append(IndexEntry(
            example_id=item["example_id"],
            db_id=item["db_id"],
            question=item["question"],
            sql=item["sql"],
            tree=tree,
            anonymized=anonymize(tree),
            size=tree_size(tree),
            fingerprint=fingerprint(tree),
        ))
    quarantine = [QuarantinedRow(q["row"], q["reason"], q.get("payload", ""))
                  for q in payload.get("quarantine", [])]
    return NeighborIndex(entries=entries, quarantine=quarantine)
