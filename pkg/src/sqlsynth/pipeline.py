"""End-to-end synthesis: workload sampling, retrieve -> mask -> fill ->
filter, and run manifests.

Per-item seeds are derived by hashing (master seed, workload index), so a
bounded worker pool can process items in any order without changing the
output; the emitted JSONL is byte-reproducible for a fixed configuration.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence

from .corpus import ParallelExample, Schema, Workload
from .errors import SqlParseError, SqlSynthError, TransportError
from .fill import FillCandidate, FillRequest, heuristic_fill, remote_fill
from .filtering import (FilterModel, ScoringContext, _swap_values_stmt,
                        select_and_filter)
from .masking import SchemaFrequencyTable, mask_frequency
from .retrieval import NeighborIndex, retrieve
from .sql2eng import to_pseudo_english
from .sqlast import parse_statement, render_sql, to_ra_tree

__all__ = [
    "PipelineConfig",
    "SynthesizedPair",
    "RunReport",
    "sample_workload",
    "synthesize",
    "make_backend",
    "derive_seed",
    "load_dev_groups",
    "write_pairs_jsonl",
]


@dataclass
class PipelineConfig:
    """Declarative knobs for one synthesis run; everything that affects the
    output is in here or in the input artifacts."""

    train_examples: Optional[str] = None
    tables: Optional[str] = None
    db_dir: Optional[str] = None
    index_snapshot: Optional[str] = None
    frequency_table: Optional[str] = None
    filter_model: Optional[str] = None
    output: Optional[str] = None

    max_distance: float = 0.1
    templates_per_sql: int = 5
    retrieve_limit: int = 10
    backend: str = "heuristic"  # heuristic | remote
    endpoint: Optional[str] = None
    candidates_per_template: int = 2
    top_k: int = 5
    threshold: float = 0.5
    workload_fraction: float = 0.7
    seed: int = 13
    workers: int = 1

    def __post_init__(self):
        if not (0.0 < self.workload_fraction <= 1.0):
            raise ValueError("workload_fraction must be in (0, 1]")
        if self.templates_per_sql * self.candidates_per_template > 32:
            raise ValueError("templates_per_sql x candidates_per_template must be <= 32")
        if self.backend not in ("heuristic", "remote"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "remote" and not self.endpoint:
            raise ValueError("remote backend needs an endpoint")

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "PipelineConfig":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        payload.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**payload)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class SynthesizedPair:
    text: str
    sql: str
    db_id: str
    workload_index: int
    source: str  # donor example id as a string, or "sql_only"
    score: float

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "sql": self.sql,
            "db_id": self.db_id,
            "provenance": {
                "workload_index": self.workload_index,
                "source": self.source,
                "score": round(self.score, 9),
            },
        }


@dataclass
class RunReport:
    per_sql: list[dict] = field(default_factory=list)
    failed_sql: list[dict] = field(default_factory=list)

    @property
    def total_kept(self) -> int:
        return sum(row["kept"] for row in self.per_sql)

    @property
    def fallback_rate(self) -> float:
        if not self.per_sql:
            return 0.0
        fallbacks = sum(1 for row in self.per_sql if row["retrieved"] == 0)
        return fallbacks / len(self.per_sql)

    def as_dict(self) -> dict:
        return {
            "per_sql": self.per_sql,
            "failed_sql": self.failed_sql,
            "total_kept": self.total_kept,
            "fallback_rate": self.fallback_rate,
        }


def derive_seed(master_seed: int, *parts) -> int:
    """Stable per-item seed, independent of execution order."""
    key = ":".join([str(master_seed)] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


def sample_workload(examples: Sequence[ParallelExample], fraction: float,
                    schema: Schema, seed: int) -> Workload:
    """Deduplicate the target schema's SQLs, sample ceil(fraction * N)
    without replacement, then resample each literal from its column
    (originals kept when a column yields nothing)."""
    unique: list[str] = []
    seen: set[str] = set()
    for example in examples:
        if example.db_id == schema.db_id and example.sql not in seen:
            seen.add(example.sql)
            unique.append(example.sql)
    if not unique:
        raise SqlSynthError(f"no examples for target schema {schema.db_id!r}")
    k = math.ceil(fraction * len(unique))
    rng = random.Random(seed)
    chosen_idx = sorted(rng.sample(range(len(unique)), k))
    chosen = [unique[i] for i in chosen_idx]

    queries: list[str] = []
    taken: set[str] = set()
    for qi, sql in enumerate(chosen):
        try:
            stmt = parse_statement(sql, schema)
        except SqlParseError:
            candidate = sql
        else:
            candidate = sql
            for attempt in range(5):
                value_rng = random.Random(derive_seed(seed, "workload", qi, attempt))
                resampled, _ = _swap_values_stmt(stmt, schema, value_rng,
                                                 require_different=False)
                rendered = render_sql(resampled)
                if rendered not in taken:
                    candidate = rendered
                    break
            else:
                candidate = sql
        if candidate in taken:
            continue  # resampling collided and the original is taken too
        taken.add(candidate)
        queries.append(candidate)
    return Workload(schema.db_id, tuple(queries), fraction, seed)


def make_backend(config: PipelineConfig) -> Callable[[FillRequest], list[FillCandidate]]:
    if config.backend == "heuristic":
        return heuristic_fill
    endpoint = config.endpoint

    def _remote(request: FillRequest) -> list[FillCandidate]:
        return remote_fill(request, endpoint)

    return _remote


def synthesize(workload: Workload,
               index: NeighborIndex,
               table: SchemaFrequencyTable,
               backend: Callable[[FillRequest], list[FillCandidate]],
               model: FilterModel,
               config: PipelineConfig,
               schema: Optional[Schema] = None) -> tuple[list[SynthesizedPair], RunReport]:
    """Run the retrieve -> mask -> fill -> filter loop over every workload
    SQL. A transport failure aborts only the affected SQL; the run fails
    only if every SQL fails."""
    by_id = {entry.example_id: entry for entry in index.entries}

    def process(wi: int, sql: str):
        tree = to_ra_tree(parse_statement(sql, schema))
        pseudo = to_pseudo_english(tree)
        results = retrieve(index, tree, workload.db_id,
                           max_distance=config.max_distance,
                           limit=config.templates_per_sql,
                           exclude_db=workload.db_id)
        pooled: list[FillCandidate] = []
        provenance: dict[str, str] = {}
        if results:
            for ti, result in enumerate(results):
                entry = by_id[result.example_id]
                template = mask_frequency(entry.question, table,
                                          source_example_id=entry.example_id,
                                          source_db_id=entry.db_id)
                request = FillRequest(
                    pseudo=pseudo, template=template,
                    num_candidates=config.candidates_per_template,
                    seed=derive_seed(config.seed, wi, ti))
                for candidate in backend(request):
                    text = " ".join(candidate.text.split())
                    pooled.append(candidate)
                    provenance.setdefault(text, str(entry.example_id))
        else:
            request = FillRequest(
                pseudo=pseudo, template=None,
                num_candidates=config.candidates_per_template,
                seed=derive_seed(config.seed, wi, "sql_only"))
            for candidate in backend(request):
                text = " ".join(candidate.text.split())
                pooled.append(candidate)
                provenance.setdefault(text, "sql_only")
        kept_pairs: list[SynthesizedPair] = []
        generated = len(pooled)
        if pooled:
            context = ScoringContext(sql, tree, pseudo, table)
            for scored in select_and_filter(pooled, context, model,
                                            top_k=config.top_k,
                                            threshold=config.threshold):
                kept_pairs.append(SynthesizedPair(
                    text=scored.text, sql=sql, db_id=workload.db_id,
                    workload_index=wi,
                    source=provenance.get(scored.text, "sql_only"),
                    score=scored.score))
        stats = {"workload_index": wi, "sql": sql, "retrieved": len(results),
                 "generated": generated, "kept": len(kept_pairs)}
        return kept_pairs, stats

    report = RunReport()
    pairs: list[SynthesizedPair] = []
    jobs = list(enumerate(workload.queries))

    def run_one(job):
        wi, sql = job
        try:
            return wi, process(wi, sql), None
        except (TransportError, SqlParseError) as exc:
            return wi, None, exc

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(run_one, jobs))
    else:
        outcomes = [run_one(job) for job in jobs]

    for (wi, sql), (_, outcome, error) in zip(jobs, outcomes):
        if error is not None:
            report.failed_sql.append({"workload_index": wi, "sql": sql,
                                      "error": str(error)})
            continue
        kept_pairs, stats = outcome
        pairs.extend(kept_pairs)
        report.per_sql.append(stats)
    if jobs and not report.per_sql:
        raise SqlSynthError(
            f"every workload SQL failed; first error: {report.failed_sql[0]['error']}")
    return pairs, report


def write_pairs_jsonl(pairs: Sequence[SynthesizedPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(json.dumps(pair.to_json(), ensure_ascii=False,
                                    sort_keys=True) + "\n")


def write_manifest(config: PipelineConfig, report: RunReport,
                   path: str | Path) -> None:
    from . import __version__

    manifest = {
        "config": asdict(config),
        "config_hash": config.config_hash(),
        "package_version": __version__,
        "report": report.as_dict(),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True),
                          encoding="utf-8")


def load_dev_groups() -> dict[str, list[str]]:
    """Static evaluation grouping of related dev schemas (config data, not
    an algorithm)."""
    payload = resources.files("sqlsynth.data").joinpath(
        "spider_dev_groups.json").read_text(encoding="utf-8")
    return json.loads(payload)
