"""The fill protocol wire contract: request/response JSON schemas and a
lightweight validator (no dependency beyond the stdlib; services and tests
can additionally validate with jsonschema against these definitions)."""

from __future__ import annotations

MASK = "MASK"
SPAN_KINDS = ("table", "column", "value")
MAX_CANDIDATES = 32

REQUEST_SCHEMA = {
    "type": "object",
    "required": ["pseudo", "num_candidates", "seed"],
    "properties": {
        "template_tokens": {
            "oneOf": [
                {"type": "null"},
                {"type": "array", "items": {"type": "string"}, "minItems": 1},
            ]
        },
        "pseudo": {
            "type": "object",
            "required": ["text", "spans"],
            "properties": {
                "text": {"type": "string"},
                "spans": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["start", "end", "kind"],
                        "properties": {
                            "start": {"type": "integer", "minimum": 0},
                            "end": {"type": "integer", "minimum": 0},
                            "kind": {"enum": list(SPAN_KINDS)},
                        },
                    },
                },
            },
        },
        "num_candidates": {"type": "integer", "minimum": 1,
                           "maximum": MAX_CANDIDATES},
        "seed": {"type": "integer"},
    },
}

RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["candidates"],
    "properties": {
        "candidates": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["text", "score"],
                "properties": {
                    "text": {"type": "string", "minLength": 1},
                    "score": {"type": "number"},
                },
            },
        },
    },
}

HEALTH_SCHEMA = {
    "type": "object",
    "required": ["status", "backend"],
    "properties": {
        "status": {"enum": ["ok"]},
        "backend": {"type": "string"},
    },
}


class ProtocolError(ValueError):
    """The request body does not follow the fill protocol."""


def validate_request(payload) -> None:
    """Raise ProtocolError unless ``payload`` is a structurally valid fill
    request; keeps the service's 400 responses precise without pulling in a
    schema library at runtime."""
    if not isinstance(payload, dict):
        raise ProtocolError("request body must be a JSON object")
    template = payload.get("template_tokens")
    if template is not None:
        if (not isinstance(template, list) or not template
                or not all(isinstance(t, str) for t in template)):
            raise ProtocolError("template_tokens must be null or a non-empty "
                                "array of strings")
    pseudo = payload.get("pseudo")
    if not isinstance(pseudo, dict) or "text" not in pseudo or "spans" not in pseudo:
        raise ProtocolError("pseudo must be an object with text and spans")
    if not isinstance(pseudo["text"], str):
        raise ProtocolError("pseudo.text must be a string")
    spans = pseudo["spans"]
    if not isinstance(spans, list):
        raise ProtocolError("pseudo.spans must be an array")
    for i, span in enumerate(spans):
        if not isinstance(span, dict):
            raise ProtocolError(f"span {i} must be an object")
        if span.get("kind") not in SPAN_KINDS:
            raise ProtocolError(f"span {i} has unknown kind {span.get('kind')!r}")
        start, end = span.get("start"), span.get("end")
        if (not isinstance(start, int) or not isinstance(end, int)
                or not 0 <= start <= end <= len(pseudo["text"])):
            raise ProtocolError(f"span {i} has out-of-bounds offsets")
    count = payload.get("num_candidates")
    if not isinstance(count, int) or not 1 <= count <= MAX_CANDIDATES:
        raise ProtocolError(
            f"num_candidates must be an integer in [1, {MAX_CANDIDATES}]")
    if not isinstance(payload.get("seed"), int):
        raise ProtocolError("seed must be an integer")
