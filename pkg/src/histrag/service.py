"""Read-only HTTP service over a loaded index.

``GET /health``, ``POST /search`` and ``POST /ask``. Malformed bodies get 400,
backend outages 502 naming the failing component, and an abstention is an
ordinary 200 response with ``abstained: true``.
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager
from dataclasses import replace
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .backends import LlmBackend
from .errors import BackendError, ConfigError, DimensionMismatchError, HistragError
from .pipeline import Pipeline, search_payload

log = logging.getLogger(__name__)


class SearchRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    query: str = Field(min_length=1)
    k: int = Field(default=5, ge=1, le=1000)
    expand: int | None = Field(default=None, ge=0, le=20)
    lang: str = "en"


class AskRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    question: str = Field(min_length=1)
    expand: int | None = Field(default=None, ge=0, le=20)
    lang: str = "en"


class BoundedLlm:
    """Caps the number of concurrent completions sent to the wrapped backend."""

    def __init__(self, inner: LlmBackend, limit: int):
        self.inner = inner
        self.model_name = inner.model_name
        self._sem = threading.BoundedSemaphore(limit)

    def complete(self, prompt: str, *, temperature: float = 0.3, max_tokens: int = 512) -> str:
        with self._sem:
            return self.inner.complete(prompt, temperature=temperature, max_tokens=max_tokens)


class _State:
    def __init__(self) -> None:
        self.pipeline: Pipeline | None = None
        self.error: str | None = None


def create_app(loader: Callable[[], Pipeline], *, max_in_flight: int = 8) -> FastAPI:
    """Build the app; ``loader`` runs in a background thread at startup so
    ``/health`` can answer 503 until the index is in memory."""
    state = _State()

    def load() -> None:
        try:
            pipe = loader()
            if pipe.llm is not None:
                pipe = replace(pipe, llm=BoundedLlm(pipe.llm, max_in_flight))
            state.pipeline = pipe
            log.info("index loaded: %d chunks", len(pipe.index))
        except Exception as exc:  # surfaced through /health
            log.exception("index load failed")
            state.error = str(exc)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        threading.Thread(target=load, daemon=True, name="index-loader").start()
        yield

    app = FastAPI(title="histrag", lifespan=lifespan)
    app.state.histrag = state

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError) -> JSONResponse:
        errors = [{"loc": list(e.get("loc", ())), "msg": e.get("msg", "")} for e in exc.errors()]
        return JSONResponse(status_code=400, content={"error": "invalid request", "detail": errors})

    @app.exception_handler(BackendError)
    async def backend_down(request: Request, exc: BackendError) -> JSONResponse:
        return JSONResponse(status_code=502, content={"error": str(exc), "component": exc.component})

    @app.exception_handler(DimensionMismatchError)
    async def bad_dim(request: Request, exc: DimensionMismatchError) -> JSONResponse:
        return JSONResponse(status_code=502, content={"error": str(exc), "component": "embedding"})

    @app.exception_handler(ConfigError)
    async def misconfigured(request: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=503, content={"error": str(exc)})

    @app.exception_handler(HistragError)
    async def internal(request: Request, exc: HistragError) -> JSONResponse:
        return JSONResponse(status_code=500, content={"error": str(exc)})

    def ready() -> Pipeline | JSONResponse:
        if state.pipeline is None:
            body = {"status": "error", "error": state.error} if state.error else {"status": "loading"}
            return JSONResponse(status_code=503, content=body)
        return state.pipeline

    @app.get("/health")
    def health():
        pipe = ready()
        if isinstance(pipe, JSONResponse):
            return pipe
        return {"status": "ok", "index_count": len(pipe.index)}

    @app.post("/search")
    def search(req: SearchRequest):
        pipe = ready()
        if isinstance(pipe, JSONResponse):
            return pipe
        qs, fused = pipe.retrieve(req.query, req.lang, expand=req.expand, k=req.k)
        return search_payload(qs, fused, pipe.index, pipe.retrieval.rrf_k)

    @app.post("/ask")
    def ask(req: AskRequest):
        pipe = ready()
        if isinstance(pipe, JSONResponse):
            return pipe
        return pipe.ask(req.question, req.lang, expand=req.expand).to_dict()

    return app
