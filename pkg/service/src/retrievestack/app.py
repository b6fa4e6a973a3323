"""HTTP surface: POST /retrieve and GET /health.

Requests are rejected with 400 when malformed and with 503 while the
engine is still loading, so callers can poll /health before sending
traffic.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import ServiceConfig, load_texts
from .engine import RetrievalEngine


def create_app(config: ServiceConfig, texts: dict[int, str] | None = None,
               defer_load: bool = False) -> FastAPI:
    app = FastAPI(title="retrievestack")
    app.state.config = config
    app.state.engine = None

    def load_engine() -> None:
        if app.state.engine is None:
            corpus = texts if texts is not None else load_texts(config.collection)
            app.state.engine = RetrievalEngine(
                corpus,
                pool_depth=config.pool_depth,
                head_size=config.head_size,
                dim=config.embedding_dim,
                seed=config.embedding_seed,
            )

    app.state.load_engine = load_engine
    if not defer_load:
        load_engine()

    @app.get("/health")
    def health():
        ready = app.state.engine is not None
        return {
            "status": "ok" if ready else "loading",
            "models_loaded": ready,
            "index_ready": ready,
        }

    @app.post("/retrieve")
    async def retrieve(request: Request):
        if app.state.engine is None:
            return JSONResponse({"error": "engine still loading"}, status_code=503)
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict):
            return JSONResponse({"error": "body must be an object"}, status_code=400)
        query = body.get("query")
        k = body.get("k")
        if not isinstance(query, str) or not query.strip():
            return JSONResponse({"error": "query must be a non-empty string"}, status_code=400)
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            return JSONResponse({"error": "k must be a positive integer"}, status_code=400)
        candidates = app.state.engine.retrieve(query, k)
        return {"candidates": [c.as_dict() for c in candidates]}

    return app
