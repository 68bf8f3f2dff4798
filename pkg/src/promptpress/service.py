"""Stateless HTTP compression service.

POST /v1/compress takes {context, question?, constraint?} and returns the
selection; GET /healthz reports per-backend health (200 even when degraded);
GET /version identifies the engine, segmenter rules, and config digest.
Responses are serialized canonically so identical requests over identical
configs produce byte-identical bodies.
"""

from __future__ import annotations

from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, Response

from . import __version__
from .artifacts import canonical_json
from .config import EngineConfig, constraint_from_dict
from .engine import CompressionEngine
from .errors import BackendError, EngineError
from .textseg import SEGMENTER_RULE_VERSION


def _json_response(payload: dict, status_code: int = 200) -> Response:
    return Response(
        content=canonical_json(payload) + "\n",
        status_code=status_code,
        media_type="application/json",
    )


def create_app(config: EngineConfig | None = None, engine: CompressionEngine | None = None) -> FastAPI:
    engine = engine if engine is not None else CompressionEngine(config or EngineConfig())

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.backend_status = engine.health()
        app.state.ready = True
        yield

    app = FastAPI(title="promptpress", lifespan=lifespan)
    app.state.ready = False
    app.state.engine = engine

    @app.get("/healthz")
    def healthz() -> Response:
        status = engine.health()
        overall = "ok" if all(v == "ok" for v in status.values()) else "degraded"
        return _json_response({"status": overall, "backend_status": status})

    @app.get("/version")
    def version() -> Response:
        return _json_response(
            {
                "engine": __version__,
                "segmenter_rules": SEGMENTER_RULE_VERSION,
                "config_digest": engine.config_digest,
            }
        )

    @app.post("/v1/compress")
    async def compress_endpoint(request: Request) -> Response:
        if not app.state.ready:
            return _json_response({"error": "service is starting"}, 503)
        try:
            body = await request.json()
        except Exception:
            return _json_response({"error": "body is not valid JSON"}, 400)
        if not isinstance(body, dict) or not isinstance(body.get("context"), str):
            return _json_response({"error": "body needs a string 'context' field"}, 400)
        question = body.get("question")
        if question is not None and not isinstance(question, str):
            return _json_response({"error": "'question' must be a string"}, 400)
        constraint = None
        if "constraint" in body:
            if not isinstance(body["constraint"], dict):
                return _json_response({"error": "'constraint' must be an object"}, 422)
            try:
                constraint = constraint_from_dict(body["constraint"])
            except (ValueError, KeyError) as exc:
                return _json_response({"error": f"invalid constraint: {exc}"}, 422)
        try:
            outcome = engine.compress_text(body["context"], question=question, constraint=constraint)
        except BackendError as exc:
            return _json_response({"error": f"backend failure: {exc}"}, 502)
        except EngineError as exc:
            return _json_response({"error": str(exc)}, 400)
        compressed = outcome.compressed
        payload = {
            "compressed": compressed.text,
            "selected_indices": list(compressed.selected_indices),
            "scores": [s.score for s in compressed.selected],
            "tokens": compressed.total_tokens,
            "achieved_ratio": compressed.achieved_ratio,
            "config_digest": engine.config_digest,
        }
        if compressed.warning:
            payload["warning"] = compressed.warning
        if not outcome.question_supplied:
            payload["task_description"] = outcome.task_description.text
        return _json_response(payload)

    return app
