"""HTTP API for the authoring UI.

Stateless: every request carries the full plan (mask inline as RLE) and the
response is a pure function of the body.  /api/plan responses are serialized
with the same canonical JSON as the plan command's plan.json, so the two are
byte-identical for identical inputs.

Limits (documented in 422 bodies): simulation steps ≤ 64 and grid ≤ 32×32;
request bodies over 8 MiB are rejected with 400.
"""

from __future__ import annotations

import base64
import json
import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .errors import GeometryError, ParseError
from .io_formats import canonical_json, encode_ppm, parse_drag_plan
from .pipeline import difference_heatmap, run_plan, run_simulation

MAX_BODY_BYTES = 8 * 1024 * 1024
MAX_SIM_STEPS = 64
MAX_SIM_GRID = 32

log = logging.getLogger("dragfield.server")


def _error(status: int, message: str, path: str = "") -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message, "path": path})


def create_app() -> FastAPI:
    app = FastAPI(title="dragfield", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/health")
    def health() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.post("/api/plan")
    async def api_plan(request: Request) -> Response:
        body = await request.body()
        if len(body) > MAX_BODY_BYTES:
            return _error(400, f"body exceeds {MAX_BODY_BYTES} bytes")
        try:
            plan = parse_drag_plan(body, base_dir=None)
        except ParseError as exc:
            return _error(400, exc.message, exc.path)
        try:
            doc = run_plan(plan)
        except GeometryError as exc:
            return _error(422, f"{type(exc).__name__}: {exc}")
        log.info("plan %dx%d, %d instruction(s)", plan.grid.width, plan.grid.height,
                 len(plan.instructions))
        return Response(content=canonical_json(doc), media_type="application/json")

    @app.post("/api/simulate")
    async def api_simulate(request: Request) -> Response:
        body = await request.body()
        if len(body) > MAX_BODY_BYTES:
            return _error(400, f"body exceeds {MAX_BODY_BYTES} bytes")
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            return _error(400, f"invalid JSON: {exc}")
        if not isinstance(doc, dict):
            return _error(400, "top level must be an object")

        sim = {}
        for key, default in (("seed", 0), ("steps", 50), ("activation", 40)):
            value = doc.pop(key, default)
            if isinstance(value, bool) or not isinstance(value, int):
                return _error(400, f"expected integer, got {value!r}", f"/{key}")
            sim[key] = value
        try:
            plan = parse_drag_plan(json.dumps(doc), base_dir=None)
        except ParseError as exc:
            return _error(400, exc.message, exc.path)

        if sim["steps"] > MAX_SIM_STEPS:
            return _error(422, f"steps {sim['steps']} exceeds limit {MAX_SIM_STEPS}")
        if sim["steps"] < 1:
            return _error(422, f"steps must be >= 1, got {sim['steps']}")
        if not 0 <= sim["activation"] <= sim["steps"]:
            return _error(
                422,
                f"activation {sim['activation']} outside [0, {sim['steps']}]",
            )
        if plan.grid.width > MAX_SIM_GRID or plan.grid.height > MAX_SIM_GRID:
            return _error(
                422,
                f"grid {plan.grid.width}x{plan.grid.height} exceeds "
                f"limit {MAX_SIM_GRID}x{MAX_SIM_GRID}",
            )

        try:
            result = run_simulation(
                plan,
                seed=sim["seed"],
                steps=sim["steps"],
                activation=sim["activation"],
            )
        except GeometryError as exc:
            return _error(422, f"{type(exc).__name__}: {exc}")
        preview = encode_ppm(difference_heatmap(result.output, result.baseline))
        payload = {
            "metrics": result.metrics,
            "preview": base64.b64encode(preview).decode("ascii"),
        }
        log.info(
            "simulate %dx%d steps=%d activation=%d",
            plan.grid.width, plan.grid.height, sim["steps"], sim["activation"],
        )
        return Response(content=canonical_json(payload), media_type="application/json")

    return app
