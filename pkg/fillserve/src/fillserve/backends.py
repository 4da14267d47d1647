"""Fill backends.

The dummy backend is a standalone implementation of the deterministic
slot-fill rule (canonical left-to-right fill from the marked spans, then
single-slot variants), kept intentionally independent of any client-side
code so differential tests across implementations stay meaningful. Real
seq2seq models plug in through :class:`Seq2SeqAdapter`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Protocol

from .protocol import MASK

_MARKER_RE = re.compile("⟦(?:table|column|value):(.*?)⟧")
_KIND_ORDER = ("table", "column", "value")


@dataclass(frozen=True)
class Candidate:
    text: str
    score: float = 0.0


class Backend(Protocol):
    name: str

    def fill(self, template_tokens: Optional[list[str]], pseudo: dict,
             num_candidates: int, seed: int) -> list[Candidate]:
        ...


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


class DummyBackend:
    """Rule-based filler matching the client-side heuristic byte for byte."""

    name = "dummy"

    def fill(self, template_tokens, pseudo, num_candidates, seed):
        text = pseudo["text"]
        if template_tokens is None:
            return [Candidate(_normalize_ws(_MARKER_RE.sub(r"\1", text)))]

        pool = []
        for kind in _KIND_ORDER:
            for span in pseudo["spans"]:
                if span["kind"] == kind:
                    token = text[span["start"]:span["end"]]
                    if token != "*":
                        pool.append(token)
        slots = [i for i, token in enumerate(template_tokens) if token == MASK]

        def render(assignment):
            filled = [assignment.get(i, token)
                      for i, token in enumerate(template_tokens)
                      if not (token == MASK and i not in assignment)]
            return _normalize_ws(" ".join(filled))

        canonical = {slot: pool[j % len(pool)]
                     for j, slot in enumerate(slots)} if pool else {}
        assignments = [canonical]
        for step in range(1, len(pool)):
            for j, slot in enumerate(slots):
                variant = dict(canonical)
                variant[slot] = pool[(j + step) % len(pool)]
                assignments.append(variant)

        candidates: list[Candidate] = []
        seen: set[str] = set()
        for assignment in assignments:
            rendered = render(assignment)
            if not rendered or rendered in seen:
                continue
            seen.add(rendered)
            candidates.append(Candidate(rendered))
            if len(candidates) == num_candidates:
                break
        return candidates


class Seq2SeqAdapter(Protocol):
    """Slot for trained encoder-decoder backends.

    ``fit`` consumes (input, target) pairs from the training-mixture JSONL;
    ``generate`` decodes candidates for one serialized encoder input.
    """

    def fit(self, records: list[dict], hyperparameters: dict, out_dir: str) -> str:
        ...

    def generate(self, encoder_input: str, num_candidates: int, seed: int) -> list[str]:
        ...


class DummyAdapter:
    """No-op trainer used to validate mixture files in integration tests."""

    name = "dummy"

    def fit(self, records, hyperparameters, out_dir) -> str:
        from pathlib import Path
        import json

        checkpoint = Path(out_dir) / "dummy-checkpoint.json"
        checkpoint.write_text(json.dumps({
            "backend": self.name,
            "records": len(records),
            "hyperparameters": hyperparameters,
        }))
        return str(checkpoint)

    def generate(self, encoder_input, num_candidates, seed):
        raise NotImplementedError("the dummy adapter does not decode")


BACKENDS = {"dummy": DummyBackend}
ADAPTERS = {"dummy": DummyAdapter}


def make_backend(name: str, checkpoint: Optional[str] = None) -> Backend:
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}")
    if name == "dummy":
        return DummyBackend()
    return BACKENDS[name](checkpoint)  # pragma: no cover - adapter-provided
