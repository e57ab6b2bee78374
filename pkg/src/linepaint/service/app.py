"""FastAPI application factory.

The model store is attached during startup, so `/healthz` reports
"loading" (and `/v1/colorize` answers 503) until the lifespan has run.
Forward passes are serialized behind a lock; everything else is
stateless, so concurrent requests behave like serialized ones.
"""

from __future__ import annotations

import base64
import binascii
import os
import threading
import uuid
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request, Response

from ..inference import (
    DEFAULT_MAX_SIDE,
    DecodeFailure,
    DimensionMismatch,
    ImageTooLarge,
    ModelNotFound,
    ModelStore,
    colorize_bytes,
)
from .schemas import (
    ColorizeJsonRequest,
    ColorizeJsonResponse,
    HealthResponse,
    ModelInfo,
    ModelsResponse,
)

MAX_PAYLOAD_BYTES = 64 * 1024 * 1024


def create_app(model_dir=None, max_side: int | None = None,
               capacity: int = 2) -> FastAPI:
    model_dir = model_dir if model_dir is not None else os.environ.get("MODEL_DIR", "models")
    if max_side is None:
        max_side = int(os.environ.get("MAX_SIDE", DEFAULT_MAX_SIDE))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.store = ModelStore(model_dir, capacity=capacity)
        app.state.ready = True
        yield

    app = FastAPI(title="linepaint", lifespan=lifespan)
    app.state.ready = False
    app.state.store = None
    app.state.infer_lock = threading.Lock()

    def require_store() -> ModelStore:
        if not app.state.ready or app.state.store is None:
            raise HTTPException(status_code=503, detail="model store is still loading")
        return app.state.store

    def pick_model(store: ModelStore, model_id: str | None):
        if model_id is None:
            available = store.list_models()
            if not available:
                raise HTTPException(status_code=404, detail="no models available")
            model_id = available[-1]
        try:
            return store.get(model_id)
        except ModelNotFound:
            raise HTTPException(status_code=404, detail=f"unknown model {model_id!r}")

    def run_pipeline(model, line_png: bytes, strokes_png: bytes | None):
        for payload in (line_png, strokes_png):
            if payload is not None and len(payload) > MAX_PAYLOAD_BYTES:
                raise HTTPException(status_code=400, detail="payload too large")
        try:
            with app.state.infer_lock:
                return colorize_bytes(model, line_png, strokes_png, max_side=max_side)
        except (DimensionMismatch, ImageTooLarge) as err:
            raise HTTPException(status_code=400, detail=str(err))
        except DecodeFailure as err:
            raise HTTPException(status_code=422, detail=str(err))

    @app.post("/v1/colorize")
    async def colorize(request: Request):
        store = require_store()
        content_type = request.headers.get("content-type", "")
        request_id = uuid.uuid4().hex[:12]

        if content_type.startswith("multipart/"):
            form = await request.form()
            line_field = form.get("line_art")
            if line_field is None or isinstance(line_field, str):
                raise HTTPException(status_code=400, detail="missing line_art file field")
            line_png = await line_field.read()
            strokes_png = None
            strokes_field = form.get("strokes")
            if strokes_field is not None and not isinstance(strokes_field, str):
                strokes_png = await strokes_field.read()
            model_field = form.get("model_id")
            model = pick_model(store, model_field if isinstance(model_field, str) else None)
            png, meta = run_pipeline(model, line_png, strokes_png)
            return Response(content=png, media_type="image/png", headers={
                "X-Model-Id": meta["model_id"],
                "X-Request-Id": request_id,
                "X-Timing-Ms": f"{meta['elapsed_ms']:.3f}",
            })

        if content_type.startswith("application/json"):
            try:
                body = ColorizeJsonRequest.model_validate(await request.json())
            except ValueError as err:
                raise HTTPException(status_code=422, detail=f"invalid request body: {err}")
            try:
                line_png = base64.b64decode(body.line_art, validate=True)
                strokes_png = (base64.b64decode(body.strokes, validate=True)
                               if body.strokes is not None else None)
            except binascii.Error as err:
                raise HTTPException(status_code=422, detail=f"invalid base64 image: {err}")
            model = pick_model(store, body.model_id)
            png, meta = run_pipeline(model, line_png, strokes_png)
            return ColorizeJsonResponse(
                image=base64.b64encode(png).decode("ascii"),
                model_id=meta["model_id"], request_id=request_id,
                timing_ms=meta["elapsed_ms"])

        raise HTTPException(status_code=400,
                            detail=f"unsupported content type {content_type!r}")

    @app.get("/v1/models", response_model=ModelsResponse)
    def list_models():
        store = require_store()
        infos = []
        for model_id in store.list_models():
            try:
                infos.append(ModelInfo(**store.describe(model_id)))
            except (ValueError, ModelNotFound):
                continue
        return ModelsResponse(models=infos)

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        if not app.state.ready or app.state.store is None:
            return HealthResponse(status="loading")
        store = app.state.store
        return HealthResponse(status="ok", available=len(store.list_models()),
                              loaded=store.loaded_ids())

    return app


__all__ = ["create_app", "MAX_PAYLOAD_BYTES"]
