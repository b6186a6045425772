"""HTTP/JSON API over the engine.

Every mutation the console performs goes through these endpoints; error
bodies are always {"error": <code>, "detail": <text>}.
"""

from __future__ import annotations

import base64
import os
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .audit import CallLog
from .context import Attachment
from .errors import (
    Conflict,
    EmptyContext,
    EngineError,
    InvalidEdit,
    NotFound,
    ObjectiveValidationFailure,
    OversizedAttachment,
)
from .gateway import ProviderGateway
from .jobs import Engine

DATA_DIR_ENV = "JITSTEER_DATA_DIR"
PROVIDERS_ENV = "JITSTEER_PROVIDERS"
CONSOLE_DIST_ENV = "JITSTEER_CONSOLE_DIST"

_STATUS_BY_ERROR = (
    (NotFound, 404),
    (Conflict, 409),
    (EmptyContext, 422),
    (OversizedAttachment, 422),
    (InvalidEdit, 422),
    (ObjectiveValidationFailure, 422),
)


class AttachmentIn(BaseModel):
    filename: str
    media_type: str
    data_b64: str


class SnapshotIn(BaseModel):
    text: str | None = None
    image_b64: str | None = None
    image_media_type: str = "image/png"
    attachments: list[AttachmentIn] = Field(default_factory=list)
    source_hint: str | None = None
    session: str | None = None


class JobIn(BaseModel):
    session: str
    kind: str
    snapshot: str = ""
    objective: dict | None = None
    config: dict = Field(default_factory=dict)


class ObjectiveEditIn(BaseModel):
    set: str
    index: int
    name: str | None = None
    description: str | None = None
    weight: int | None = None


class HelperIn(BaseModel):
    args: list = Field(default_factory=list)


def create_app(
    data_dir: str | Path | None = None,
    providers_path: str | Path | None = None,
    engine: Engine | None = None,
) -> FastAPI:
    owns_engine = engine is None
    if engine is None:
        data_dir = data_dir or os.environ.get(DATA_DIR_ENV, "./data")
        providers_path = providers_path or os.environ.get(PROVIDERS_ENV)
        if not providers_path:
            raise RuntimeError(
                f"provider config required: pass providers_path or set {PROVIDERS_ENV}"
            )
        gateway = ProviderGateway.from_config_file(providers_path, call_log=CallLog())
        engine = Engine(data_dir, gateway)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        if owns_engine:
            engine.shutdown(wait=False)

    app = FastAPI(title="jitsteer", version="0.1.0", lifespan=lifespan)
    app.state.engine = engine

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, exc: EngineError):
        status = 500
        for error_type, code in _STATUS_BY_ERROR:
            if isinstance(exc, error_type):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    # -- sessions ---------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session():
        session = engine.create_session()
        return session.to_dict()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return engine.get_session(session_id).to_dict()

    # -- snapshots ----------------------------------------------------------

    @app.post("/snapshots", status_code=201)
    def create_snapshot(body: SnapshotIn):
        image = base64.b64decode(body.image_b64) if body.image_b64 else None
        attachments = [
            Attachment(a.filename, a.media_type, base64.b64decode(a.data_b64))
            for a in body.attachments
        ]
        snapshot = engine.create_snapshot(
            text=body.text,
            image=image,
            image_media_type=body.image_media_type,
            attachments=attachments,
            source_hint=body.source_hint,
            session_id=body.session,
        )
        return {"snapshot_id": snapshot.snapshot_id, "truncated": snapshot.truncated}

    @app.get("/snapshots/{snapshot_id}")
    def get_snapshot(snapshot_id: str):
        snapshot = engine.get_snapshot(snapshot_id)
        return {
            "snapshot_id": snapshot.snapshot_id,
            "text_content": snapshot.text_content,
            "has_image": snapshot.image is not None,
            "image_media_type": snapshot.image_media_type,
            "attachments": [
                {"filename": a.filename, "media_type": a.media_type}
                for a in snapshot.attachments
            ],
            "source_hint": snapshot.source_hint,
            "captured_at": snapshot.captured_at,
            "truncated": snapshot.truncated,
        }

    # -- jobs -----------------------------------------------------------------

    @app.post("/jobs", status_code=201)
    def start_job(body: JobIn):
        inputs = {"snapshot": body.snapshot, "objective": body.objective,
                  "config": body.config}
        job = engine.start_job(body.session, body.kind, inputs)
        return {"job_id": job.job_id, "state": job.state}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return engine.get_job(job_id).to_dict()

    @app.get("/jobs/{job_id}/calls")
    def get_job_calls(job_id: str):
        return {"job_id": job_id, "calls": engine.job_calls(job_id)}

    # -- objectives --------------------------------------------------------------

    @app.get("/sessions/{session_id}/objectives")
    def list_objectives(session_id: str):
        return {"session_id": session_id, "sets": engine.list_objectives(session_id)}

    @app.patch("/sessions/{session_id}/objectives")
    def edit_objective(session_id: str, body: ObjectiveEditIn):
        override = engine.edit_objective(
            session_id, body.set, body.index,
            {"name": body.name, "description": body.description, "weight": body.weight},
        )
        return {"set": body.set, "index": body.index, **override}

    # -- helper bridge --------------------------------------------------------------

    @app.post("/runs/{run_id}/helpers/{name}")
    def helper(run_id: str, name: str, body: HelperIn):
        return {"result": engine.helper_call(run_id, name, body.args)}

    console_dist = os.environ.get(CONSOLE_DIST_ENV, "frontend/dist")
    if Path(console_dist).is_dir():
        app.mount("/console", StaticFiles(directory=console_dist, html=True),
                  name="console")

    return app


def main() -> None:  # pragma: no cover - exercised via subprocess in tests
    import uvicorn

    host = os.environ.get("JITSTEER_HOST", "127.0.0.1")
    port = int(os.environ.get("JITSTEER_PORT", "8600"))
    uvicorn.run(create_app(), host=host, port=port, log_level="warning")


if __name__ == "__main__":  # pragma: no cover
    main()
