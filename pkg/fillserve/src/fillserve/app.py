"""FastAPI application exposing the fill protocol."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .backends import make_backend
from .protocol import ProtocolError, validate_request


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    backend: str = "dummy"
    checkpoint: Optional[str] = None
    max_batch_size: int = 16
    request_timeout: float = 30.0

    def __post_init__(self):
        if self.backend == "dummy" and self.checkpoint is not None:
            # the rule-based backend carries no weights
            self.checkpoint = None


def create_app(config: ServeConfig | None = None) -> FastAPI:
    config = config or ServeConfig()
    backend = make_backend(config.backend, config.checkpoint)  # fail fast
    app = FastAPI(title="fillserve", docs_url=None, redoc_url=None)

    @app.get("/health")
    async def health():
        return {"status": "ok", "backend": backend.name}

    @app.post("/fill")
    async def fill(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        try:
            validate_request(payload)
        except ProtocolError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        try:
            candidates = backend.fill(
                payload.get("template_tokens"),
                payload["pseudo"],
                payload["num_candidates"],
                payload["seed"],
            )
        except Exception as exc:  # surface backend faults as service errors
            return JSONResponse({"error": f"backend failure: {exc}"},
                                status_code=503)
        return {"candidates": [{"text": c.text, "score": c.score}
                               for c in candidates]}

    return app


def serve(config: ServeConfig) -> None:  # pragma: no cover - manual entry
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
