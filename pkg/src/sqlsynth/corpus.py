"""Load Spider-format datasets, schemas, and embedded SQLite databases.

Loaders materialize everything up front (corpora at this scale fit in
memory) and never silently drop rows: structurally bad rows land in a
quarantine report carrying the row index and the reason.
"""

from __future__ import annotations

import json
import random
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import CorpusError, SqlParseError

__all__ = [
    "Column",
    "Table",
    "Schema",
    "ParallelExample",
    "Workload",
    "QuarantinedRow",
    "LoadResult",
    "load_examples",
    "load_schemas",
    "validate_corpus",
    "sample_column_values",
    "write_examples_jsonl",
    "read_examples_jsonl",
]

COLUMN_TYPES = {"text", "number", "time", "boolean", "other"}


@dataclass(frozen=True)
class Column:
    name: str
    type: str = "text"


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]


@dataclass(frozen=True)
class Schema:
    """One database schema; ``db_path`` points at the embedded SQLite file
    when available."""

    db_id: str
    tables: tuple[Table, ...]
    primary_keys: tuple[tuple[str, str], ...] = ()
    foreign_keys: tuple[tuple[tuple[str, str], tuple[str, str]], ...] = ()
    db_path: Optional[Path] = None

    def __post_init__(self):
        names = [t.name.lower() for t in self.tables]
        if len(set(names)) != len(names):
            raise CorpusError(f"duplicate table names in schema {self.db_id!r}")
        for ref in self.primary_keys:
            if self.resolve_column(ref[0], ref[1]) is None:
                raise CorpusError(f"primary key {ref} does not resolve in {self.db_id!r}")
        for left, right in self.foreign_keys:
            for ref in (left, right):
                if self.resolve_table(ref[0]) is None or self.resolve_column(ref[0], ref[1]) is None:
                    raise CorpusError(f"foreign key endpoint {ref} does not resolve in {self.db_id!r}")

    def resolve_table(self, name: str) -> Optional[str]:
        """Original spelling of a table name, matched case-insensitively."""
        lowered = name.lower()
        for table in self.tables:
            if table.name.lower() == lowered:
                return table.name
        return None

    def resolve_column(self, table: str, column: str) -> Optional[str]:
        lowered_table = table.lower()
        lowered_col = column.lower()
        if lowered_col == "*":
            return "*"
        for t in self.tables:
            if t.name.lower() != lowered_table:
                continue
            for c in t.columns:
                if c.name.lower() == lowered_col:
                    return c.name
        return None

    def column_names(self) -> list[str]:
        return [c.name for t in self.tables for c in t.columns]

    def table_of_column(self, column: str) -> Optional[str]:
        """First table (in schema order) declaring the column."""
        lowered = column.lower()
        for t in self.tables:
            for c in t.columns:
                if c.name.lower() == lowered:
                    return t.name
        return None


@dataclass(frozen=True)
class ParallelExample:
    question: str
    sql: str
    db_id: str


@dataclass(frozen=True)
class Workload:
    db_id: str
    queries: tuple[str, ...]
    fraction: float
    seed: int

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if len(set(self.queries)) != len(self.queries):
            raise ValueError("workload contains duplicate SQL strings")


@dataclass(frozen=True)
class QuarantinedRow:
    row: int
    reason: str
    payload: str = ""


@dataclass
class LoadResult:
    examples: list[ParallelExample] = field(default_factory=list)
    quarantine: list[QuarantinedRow] = field(default_factory=list)

    def __iter__(self):
        return iter(self.examples)

    def __len__(self):
        return len(self.examples)


def _read_json(path: Path):
    if not path.exists():
        raise CorpusError("file not found", path=str(path))
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed JSON: {exc}", path=str(path)) from exc


def load_examples(path: str | Path) -> LoadResult:
    """Load a Spider-style example file (fields question/query/db_id).

    Rows missing a field or with the wrong type are quarantined with their
    index; everything else is returned in file order.
    """
    path = Path(path)
    data = _read_json(path)
    if not isinstance(data, list):
        raise CorpusError("expected a JSON array of examples", path=str(path))
    result = LoadResult()
    for row, entry in enumerate(data):
        if not isinstance(entry, dict):
            result.quarantine.append(QuarantinedRow(row, "row is not an object"))
            continue
        missing = [key for key in ("question", "query", "db_id") if key not in entry]
        if missing:
            result.quarantine.append(
                QuarantinedRow(row, f"missing field(s): {', '.join(missing)}"))
            continue
        question, sql, db_id = entry["question"], entry["query"], entry["db_id"]
        if not all(isinstance(v, str) for v in (question, sql, db_id)):
            result.quarantine.append(QuarantinedRow(row, "fields must be strings"))
            continue
        if not question.strip():
            result.quarantine.append(QuarantinedRow(row, "empty question"))
            continue
        result.examples.append(ParallelExample(question, sql, db_id))
    return result


def load_schemas(path: str | Path, db_dir: str | Path | None = None) -> dict[str, Schema]:
    """Load a Spider ``tables.json``; returns a map db_id -> Schema.

    Column index 0 is the star column and is kept out of the per-table
    column lists (it resolves through the dedicated ``*`` rule). When
    ``db_dir`` is given, each schema's ``db_path`` points at
    ``db_dir/<db_id>/<db_id>.sqlite`` if that file exists.
    """
    path = Path(path)
    data = _read_json(path)
    if not isinstance(data, list):
        raise CorpusError("expected a JSON array of schema entries", path=str(path))
    schemas: dict[str, Schema] = {}
    for row, entry in enumerate(data):
        try:
            db_id = entry["db_id"]
            table_names = entry["table_names_original"]
            column_entries = entry["column_names_original"]
            column_types = entry.get("column_types", ["text"] * len(column_entries))
            primary_keys = entry.get("primary_keys", [])
            foreign_keys = entry.get("foreign_keys", [])
        except (TypeError, KeyError) as exc:
            raise CorpusError(f"bad schema entry: missing {exc}", path=str(path), row=row)

        columns_by_table: dict[int, list[Column]] = {i: [] for i in range(len(table_names))}
        column_refs: list[Optional[tuple[str, str]]] = []
        for idx, (table_idx, column_name) in enumerate(column_entries):
            ctype = column_types[idx] if idx < len(column_types) else "text"
            if ctype not in COLUMN_TYPES:
                ctype = "other"
            if table_idx < 0:  # the star pseudo-column
                column_refs.append(None)
                continue
            if table_idx >= len(table_names):
                raise CorpusError(
                    f"column {column_name!r} references table index {table_idx} "
                    f"out of range in db {db_id!r}", path=str(path), row=row)
            columns_by_table[table_idx].append(Column(column_name, ctype))
            column_refs.append((table_names[table_idx], column_name))

        def ref(index: int, what: str) -> tuple[str, str]:
            if not (0 <= index < len(column_refs)) or column_refs[index] is None:
                raise CorpusError(
                    f"{what} references column index {index} out of range "
                    f"in db {db_id!r}", path=str(path), row=row)
            return column_refs[index]

        pk = tuple(ref(i, "primary key") for i in primary_keys)
        fk = tuple((ref(a, "foreign key"), ref(b, "foreign key")) for a, b in foreign_keys)
        tables = tuple(
            Table(name, tuple(columns_by_table[i])) for i, name in enumerate(table_names)
        )
        db_path = None
        if db_dir is not None:
            candidate = Path(db_dir) / db_id / f"{db_id}.sqlite"
            if candidate.exists():
                db_path = candidate
        schemas[db_id] = Schema(db_id, tables, pk, fk, db_path)
    return schemas


def validate_corpus(examples: Iterable[ParallelExample],
                    schemas: dict[str, Schema]) -> LoadResult:
    """Check that every example's db_id resolves and its SQL parses.

    Failing rows are quarantined (never dropped silently); the retained
    examples are returned in input order.
    """
    from .sqlast import parse_sql  # local import to avoid a cycle

    result = LoadResult()
    for row, example in enumerate(examples):
        schema = schemas.get(example.db_id)
        if schema is None:
            result.quarantine.append(
                QuarantinedRow(row, f"unknown db_id {example.db_id!r}", example.sql))
            continue
        try:
            parse_sql(example.sql, schema)
        except SqlParseError as exc:
            result.quarantine.append(QuarantinedRow(row, str(exc), example.sql))
            continue
        result.examples.append(example)
    return result


def sample_column_values(schema: Schema, column: tuple[str, str], k: int,
                         seed: int) -> list:
    """Draw ``k`` values uniformly with replacement from the distinct values
    stored in ``column`` (a (table, column) pair) of the schema's database.

    Deterministic for a given seed. An empty column yields an empty list.
    """
    table_name, column_name = column
    table = schema.resolve_table(table_name)
    if table is None or schema.resolve_column(table, column_name) is None:
        raise CorpusError(f"unknown column {table_name}.{column_name} in {schema.db_id!r}")
    if schema.db_path is None or not Path(schema.db_path).exists():
        raise CorpusError(f"no readable database file for schema {schema.db_id!r}")
    column_name = schema.resolve_column(table, column_name)
    try:
        with sqlite3.connect(f"file:{schema.db_path}?mode=ro", uri=True) as conn:
            conn.text_factory = lambda raw: raw.decode("utf-8", "replace")
            cursor = conn.execute(
                f'SELECT DISTINCT "{column_name}" FROM "{table}" '
                f'WHERE "{column_name}" IS NOT NULL')
            values = [row[0] for row in cursor.fetchall()]
    except sqlite3.Error as exc:
        raise CorpusError(
            f"cannot read column {table}.{column_name} from {schema.db_path}: {exc}")
    if not values:
        return []
    values.sort(key=lambda v: (str(type(v)), str(v)))  # engine-independent order
    rng = random.Random(seed)
    return [values[rng.randrange(len(values))] for _ in range(k)]


def write_examples_jsonl(examples: Iterable[ParallelExample], path: str | Path) -> int:
    """Write the canonical one-example-per-line JSONL interchange format."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(
                {"question": example.question, "sql": example.sql, "db_id": example.db_id},
                ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count


def read_examples_jsonl(path: str | Path) -> list[ParallelExample]:
    path = Path(path)
    if not path.exists():
        raise CorpusError("file not found", path=str(path))
    examples = []
    with open(path, encoding="utf-8") as handle:
        for row, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
                examples.append(ParallelExample(entry["question"], entry["sql"], entry["db_id"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"bad JSONL record: {exc}", path=str(path), row=row)
    return examples
