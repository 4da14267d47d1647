"""Turn retrieved questions into masked templates.

The primary masker is frequency-based: a word that shows up in the
questions of fewer than half of all training schemas is considered
schema-specific and masked. The schema-match masker (kept as a baseline for
comparison) masks tokens that string-match the source schema's table or
column names; it under-masks words whose surface form drifts from the
schema vocabulary.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import ParallelExample, Schema

__all__ = [
    "MASK",
    "SchemaFrequencyTable",
    "MaskedTemplate",
    "tokenize",
    "normalize_token",
    "build_frequency_table",
    "mask_frequency",
    "mask_schema_match",
]

MASK = "MASK"

_WORD_RE = re.compile(r"[A-Za-z0-9_']+|[^A-Za-z0-9_'\s]")
_NUMBER_RE = re.compile(r"^[+-]?\d+(\.\d+)?$")
_PUNCT_RE = re.compile(r"^[^\w\s]+$")


def tokenize(text: str) -> list[str]:
    """Whitespace + punctuation split; punctuation marks become their own
    tokens, word-internal apostrophes stay attached."""
    return _WORD_RE.findall(text)


def normalize_token(token: str) -> str:
    return token.lower().strip("'\"").strip(".,;:!?")


def is_punctuation(token: str) -> bool:
    return bool(_PUNCT_RE.match(token))


def _is_number(token: str) -> bool:
    return bool(_NUMBER_RE.match(token))


@dataclass(frozen=True)
class SchemaFrequencyTable:
    """word -> fraction of distinct schemas whose questions mention it."""

    fractions: dict[str, float]
    schema_count: int

    def fraction(self, token: str) -> float:
        return self.fractions.get(normalize_token(token), 0.0)

    def to_tsv(self) -> str:
        lines = [f"{word}\t{frac:.6f}"
                 for word, frac in sorted(self.fractions.items(),
                                          key=lambda kv: (-kv[1], kv[0]))]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(f"#schemas\t{self.schema_count}\n" + self.to_tsv(),
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SchemaFrequencyTable":
        fractions = {}
        schema_count = 0
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            word, value = line.split("\t")
            if word == "#schemas":
                schema_count = int(value)
            else:
                fractions[word] = float(value)
        return cls(fractions, schema_count)


@dataclass(frozen=True)
class MaskedTemplate:
    """Token sequence with MASK slots; never two MASKs in a row."""

    tokens: tuple[str, ...]
    source_example_id: Optional[int] = None
    source_db_id: Optional[str] = None

    def __post_init__(self):
        for left, right in zip(self.tokens, self.tokens[1:]):
            if left == MASK and right == MASK:
                raise ValueError("consecutive MASK tokens are not collapsed")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def mask_count(self) -> int:
        return sum(1 for t in self.tokens if t == MASK)


def build_frequency_table(examples: Iterable[ParallelExample]) -> SchemaFrequencyTable:
    """Schema-document frequency of every question word: in how many
    distinct schemas does the word appear at least once."""
    schema_words: dict[str, set[str]] = {}
    for example in examples:
        words = schema_words.setdefault(example.db_id, set())
        for token in tokenize(example.question):
            norm = normalize_token(token)
            if norm and not is_punctuation(token):
                words.add(norm)
    if not schema_words:
        raise ValueError("no schemas present in the example stream")
    schema_count = len(schema_words)
    counts: dict[str, int] = {}
    for words in schema_words.values():
        for word in words:
            counts[word] = counts.get(word, 0) + 1
    fractions = {word: count / schema_count for word, count in counts.items()}
    return SchemaFrequencyTable(fractions, schema_count)


def _collapse(tokens: list[str], masked: list[bool],
              source_example_id=None, source_db_id=None) -> MaskedTemplate:
    out: list[str] = []
    for token, is_masked in zip(tokens, masked):
        if is_masked:
            if out and out[-1] == MASK:
                continue
            out.append(MASK)
        else:
            out.append(token)
    if not out:
        out = [MASK]
    return MaskedTemplate(tuple(out), source_example_id, source_db_id)


def mask_frequency(text: str, table: SchemaFrequencyTable,
                   threshold: float = 0.5, *,
                   source_example_id=None, source_db_id=None) -> MaskedTemplate:
    """Mask every word mentioned in fewer than ``threshold`` of the training
    schemas (unknown words count as schema-specific); collapse runs of MASK.

    Numbers and quoted literals are always masked, punctuation is always
    kept.
    """
    if not text.strip():
        raise ValueError("cannot mask empty text")
    quoted = {normalize_token(tok)
              for span in re.findall(r'"([^"]*)"', text)
              for tok in tokenize(span)}
    tokens = tokenize(text)
    masked = []
    for token in tokens:
        if is_punctuation(token):
            masked.append(False)
        elif (_is_number(token) or token.startswith(("'", '"'))
              or normalize_token(token) in quoted):
            masked.append(True)
        else:
            masked.append(table.fraction(token) < threshold)
    return _collapse(tokens, masked, source_example_id, source_db_id)


def _identifier_parts(identifier: str) -> list[str]:
    """Split a schema identifier into word parts: underscores and camelCase
    boundaries, lowercased."""
    spaced = re.sub(r"([a-z0-9])([A-Z])", r"\1 \2", identifier)
    return [p.lower() for p in re.split(r"[_\s]+", spaced) if p]


def _plural_variants(word: str) -> set[str]:
    forms = {word}
    if word.endswith("ies") and len(word) > 3:
        forms.add(word[:-3] + "y")
    if word.endswith("es") and len(word) > 2:
        forms.add(word[:-2])
    if word.endswith("s") and len(word) > 1:
        forms.add(word[:-1])
    forms.add(word + "s")
    forms.add(word + "es")
    if word.endswith("y"):
        forms.add(word[:-1] + "ies")
    return forms


def mask_schema_match(text: str, schema: Schema,
                      extra_links: Optional[Sequence[tuple[str, str]]] = None,
                      sql_literals: Optional[Sequence[str]] = None, *,
                      source_example_id=None, source_db_id=None) -> MaskedTemplate:
    """Baseline masker: mask tokens that match the source schema's table or
    column names (case-, underscore-, and plural-insensitively), any linked
    span supplied by annotation files, or a literal of the paired SQL."""
    vocabulary: set[str] = set()
    for table in schema.tables:
        vocabulary.update(_identifier_parts(table.name))
        for column in table.columns:
            vocabulary.update(_identifier_parts(column.name))
    link_words: set[str] = set()
    for span, _element in extra_links or ():
        for token in tokenize(span):
            link_words.add(normalize_token(token))
    literal_words: set[str] = set()
    for literal in sql_literals or ():
        for token in tokenize(str(literal)):
            literal_words.add(normalize_token(token))

    tokens = tokenize(text)
    masked = []
    for token in tokens:
        if is_punctuation(token):
            masked.append(False)
            continue
        norm = normalize_token(token)
        hit = norm in link_words or norm in literal_words
        if not hit:
            hit = any(variant in vocabulary for variant in _plural_variants(norm))
        masked.append(hit)
    return _collapse(tokens, masked, source_example_id, source_db_id)
