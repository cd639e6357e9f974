"""HTTP facade over the pipeline: session registry, polling, artifacts.

Each session runs in its own thread; the client and the pipeline meet at a
per-session interaction queue with exactly-once reply consumption.
"""

from __future__ import annotations

import dataclasses
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, File, Form, HTTPException, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, Response
from pydantic import BaseModel

from .cadagent import CadScript
from .domain import Phase, SketchImage
from .orchestrator import (
    Mode,
    RunConfig,
    SessionResult,
    ValidationPresentation,
    run_session,
    run_zero_shot,
)

_ARTIFACT_PATTERNS = (
    "model.stl",
    "plan.txt",
    "phase_report.json",
    "summary.jsonl",
    "inputs/*",
    "views/*.png",
    "round_*/views/*.png",
    "round_*/review.txt",
    "attempt_*.script",
    "attempt_*.stderr",
)

_MEDIA_TYPES = {
    ".png": "image/png",
    ".stl": "model/stl",
    ".json": "application/json",
}


class CreateSessionResponse(BaseModel):
    id: str


class PendingInteraction(BaseModel):
    kind: Literal["question", "approval", "validation"]
    payload: dict


class ApiSessionView(BaseModel):
    id: str
    phase: str
    pending_interaction: PendingInteraction | None = None
    artifact_refs: list[str] = []
    error: str | None = None


class ReplyBody(BaseModel):
    text: str


class ApproveBody(BaseModel):
    approved: bool


class QueueUserIO:
    """Bridges the pipeline thread and HTTP handlers.

    The pipeline blocks in `_await`; a handler resolves the pending
    interaction exactly once, any further resolution attempt fails until
    the pipeline posts the next interaction.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._event = threading.Event()
        self._pending: dict | None = None
        self._reply: object = None
        self._resolved = False

    def _await(self, kind: str, payload: dict) -> object:
        with self._lock:
            self._pending = {"kind": kind, "payload": payload}
            self._resolved = False
            self._event.clear()
        self._event.wait()
        with self._lock:
            reply = self._reply
            self._pending = None
        return reply

    def pending(self) -> dict | None:
        with self._lock:
            if self._pending is not None and not self._resolved:
                return {"kind": self._pending["kind"], "payload": dict(self._pending["payload"])}
            return None

    def resolve_reply(self, text: str) -> bool:
        with self._lock:
            if self._pending is None or self._resolved:
                return False
            if self._pending["kind"] not in ("question", "validation"):
                return False
            self._reply = text
            self._resolved = True
            self._event.set()
            return True

    def resolve_approval(self, approved: bool) -> bool:
        with self._lock:
            if self._pending is None or self._resolved:
                return False
            if self._pending["kind"] != "approval":
                return False
            self._reply = approved
            self._resolved = True
            self._event.set()
            return True

    # UserIO protocol, called from the pipeline thread.

    def ask(self, question: str) -> str:
        return str(self._await("question", {"text": question}))

    def approve(self, script: CadScript) -> bool:
        return bool(
            self._await("approval", {"script": script.source, "attempt": script.attempt})
        )

    def validate(self, presentation: ValidationPresentation) -> str:
        payload = {
            "round": presentation.round,
            "message": presentation.message,
            "views": {
                label: f"views/{label}.png" for label in sorted(presentation.view_paths)
            },
            "script": presentation.script_source,
            "model": "model.stl",
            "sketches": list(presentation.sketch_refs),
        }
        return str(self._await("validation", payload))


@dataclass(eq=False)
class SessionRecord:
    id: str
    io: QueueUserIO
    thread: threading.Thread | None = None
    phase: str = Phase.CLARIFYING.value
    run_dir: Path | None = None
    result: SessionResult | None = None
    error: str | None = None


def _artifact_refs(run_dir: Path | None) -> list[str]:
    if run_dir is None or not run_dir.is_dir():
        return []
    refs: list[str] = []
    for pattern in _ARTIFACT_PATTERNS:
        for path in sorted(run_dir.glob(pattern)):
            if path.is_file():
                refs.append(path.relative_to(run_dir).as_posix())
    return refs


def _sketch_format(upload: UploadFile) -> str:
    name = (upload.filename or "").lower()
    content_type = (upload.content_type or "").lower()
    if name.endswith((".jpg", ".jpeg")) or content_type in ("image/jpeg", "image/jpg"):
        return "jpeg"
    return "png"


def create_app(config: RunConfig) -> FastAPI:
    app = FastAPI(title="cadteam service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    registry: dict[str, SessionRecord] = {}
    app.state.registry = registry
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def _validation_as_bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def _record_or_404(session_id: str) -> SessionRecord:
        record = registry.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return record

    @app.post("/sessions", status_code=201, response_model=CreateSessionResponse)
    async def create_session(
        text: str = Form(""),
        mode: str = Form("team"),
        sketches: list[UploadFile] = File(default=[]),
    ):
        images = []
        for upload in sketches:
            data = await upload.read()
            if data:
                images.append(
                    SketchImage(data=data, format=_sketch_format(upload), label=upload.filename or "")
                )
        if not images and not text.strip():
            raise HTTPException(status_code=400, detail="a sketch or a textual description is required")
        mode_value = mode.replace("-", "_")
        if mode_value not in (Mode.TEAM.value, Mode.ZERO_SHOT.value):
            raise HTTPException(status_code=400, detail=f"unknown mode {mode!r}")
        session_id = uuid.uuid4().hex[:12]
        io = QueueUserIO()
        record = SessionRecord(id=session_id, io=io)
        session_config = dataclasses.replace(config, mode=Mode(mode_value))

        def _set_phase(phase: Phase) -> None:
            record.phase = phase.value

        def _set_run_dir(run_dir: Path) -> None:
            record.run_dir = run_dir

        def _run() -> None:
            try:
                if session_config.mode is Mode.TEAM:
                    result = run_session(
                        images, text, session_config, io,
                        on_phase=_set_phase, on_run_dir=_set_run_dir,
                    )
                else:
                    result = run_zero_shot(
                        images, text, session_config, io,
                        on_phase=_set_phase, on_run_dir=_set_run_dir,
                    )
                record.result = result
                record.phase = result.state.phase.value
                record.error = result.error
            except Exception as exc:  # keep the registry consistent on any failure
                record.error = f"{type(exc).__name__}: {exc}"
                record.phase = Phase.FAILED.value

        thread = threading.Thread(target=_run, daemon=True, name=f"session-{session_id}")
        record.thread = thread
        registry[session_id] = record
        thread.start()
        return CreateSessionResponse(id=session_id)

    @app.get("/sessions/{session_id}", response_model=ApiSessionView)
    async def get_session(session_id: str):
        record = _record_or_404(session_id)
        pending = record.io.pending()
        return ApiSessionView(
            id=record.id,
            phase=record.phase,
            pending_interaction=PendingInteraction(**pending) if pending else None,
            artifact_refs=_artifact_refs(record.run_dir),
            error=record.error,
        )

    @app.post("/sessions/{session_id}/reply", status_code=204)
    async def post_reply(session_id: str, body: ReplyBody):
        record = _record_or_404(session_id)
        if not record.io.resolve_reply(body.text):
            raise HTTPException(status_code=409, detail="no pending question or validation")
        return Response(status_code=204)

    @app.post("/sessions/{session_id}/approve", status_code=204)
    async def post_approve(session_id: str, body: ApproveBody):
        record = _record_or_404(session_id)
        if not record.io.resolve_approval(body.approved):
            raise HTTPException(status_code=409, detail="no pending approval")
        return Response(status_code=204)

    @app.get("/sessions/{session_id}/artifacts/{artifact_path:path}")
    async def get_artifact(session_id: str, artifact_path: str):
        record = _record_or_404(session_id)
        if record.run_dir is None:
            raise HTTPException(status_code=404, detail="session has no artifacts yet")
        base = record.run_dir.resolve()
        target = (base / artifact_path).resolve()
        if base != target and base not in target.parents:
            raise HTTPException(status_code=404, detail="unknown artifact")
        if not target.is_file():
            raise HTTPException(status_code=404, detail="unknown artifact")
        media = _MEDIA_TYPES.get(target.suffix, "text/plain; charset=utf-8")
        return FileResponse(target, media_type=media)

    return app
