"""HTTP service: session lifecycle, interaction resolution, artifact serving."""

from __future__ import annotations

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from cadteam.backends import builtin_backend
from cadteam.gateway import ProviderConfig
from cadteam.orchestrator import RunConfig
from cadteam.service import create_app

from helpers import (
    BLOCK_FIXTURE,
    BLOCK_SPEC_TEXT,
    BLOCK_ZERO_SHOT_FIXTURE,
    wait_for,
)

ANSWER = "The holes have a 2 cm diameter and their centers sit 2 cm from each of the two closest edges."


def _client(tmp_path: Path, replay_path: Path, **overrides) -> TestClient:
    settings = dict(
        provider=ProviderConfig(provider="replay", replay_path=str(replay_path)),
        backend=builtin_backend(),
        run_root=tmp_path / "runs",
        render_size=128,
    )
    settings.update(overrides)
    return TestClient(create_app(RunConfig(**settings)))


def _pending(client: TestClient, session_id: str, kind: str) -> dict:
    state: dict = {}

    def _ready() -> bool:
        state.update(client.get(f"/sessions/{session_id}").json())
        pending = state.get("pending_interaction")
        if state["phase"] == "FAILED":
            raise AssertionError(f"session failed: {state.get('error')}")
        return pending is not None and pending["kind"] == kind

    wait_for(_ready, message=lambda: f"no pending {kind}; last state {state}")
    return state["pending_interaction"]


def _finished(client: TestClient, session_id: str) -> dict:
    state: dict = {}

    def _done() -> bool:
        state.update(client.get(f"/sessions/{session_id}").json())
        return state["phase"] in ("DONE", "FAILED")

    wait_for(_done, message=lambda: f"session never finished; last state {state}")
    return state


# --- input validation --------------------------------------------------------


def test_create_session_requires_some_input(tmp_path: Path):
    client = _client(tmp_path, BLOCK_FIXTURE)
    response = client.post("/sessions", data={"text": "   "})
    assert response.status_code == 400
    assert "sketch or a textual description" in response.json()["detail"]


def test_create_session_rejects_unknown_mode(tmp_path: Path):
    client = _client(tmp_path, BLOCK_FIXTURE)
    response = client.post("/sessions", data={"text": "a block", "mode": "warp"})
    assert response.status_code == 400


def test_unknown_session_is_404(tmp_path: Path):
    client = _client(tmp_path, BLOCK_FIXTURE)
    assert client.get("/sessions/nope").status_code == 404
    assert client.post("/sessions/nope/reply", json={"text": "hi"}).status_code == 404
    assert client.post("/sessions/nope/approve", json={"approved": True}).status_code == 404


def test_malformed_reply_body_is_400_not_422(tmp_path: Path, sketch_bytes):
    client = _client(tmp_path, BLOCK_FIXTURE)
    created = client.post(
        "/sessions",
        data={"text": BLOCK_SPEC_TEXT},
        files=[("sketches", ("sketch.png", sketch_bytes, "image/png"))],
    )
    assert created.status_code == 201
    session_id = created.json()["id"]
    _pending(client, session_id, "question")
    response = client.post(f"/sessions/{session_id}/reply", json={"nope": 1})
    assert response.status_code == 400
    # leave the session resolvable so the thread can finish
    client.post(f"/sessions/{session_id}/reply", json={"text": ANSWER})


# --- the full interactive flow -----------------------------------------------


def test_team_session_over_http(tmp_path: Path, sketch_bytes):
    client = _client(tmp_path, BLOCK_FIXTURE)
    created = client.post(
        "/sessions",
        data={"text": BLOCK_SPEC_TEXT, "mode": "team"},
        files=[("sketches", ("sketch.png", sketch_bytes, "image/png"))],
    )
    assert created.status_code == 201
    session_id = created.json()["id"]

    question = _pending(client, session_id, "question")
    assert "diameter" in question["payload"]["text"]
    # an approval resolution against a pending question must not consume it
    conflict = client.post(f"/sessions/{session_id}/approve", json={"approved": True})
    assert conflict.status_code == 409
    assert client.post(f"/sessions/{session_id}/reply", json={"text": ANSWER}).status_code == 204

    approval = _pending(client, session_id, "approval")
    assert "cq.Workplane" in approval["payload"]["script"]
    assert approval["payload"]["attempt"] == 1
    # a reply against a pending approval must not consume it
    assert client.post(f"/sessions/{session_id}/reply", json={"text": "y"}).status_code == 409
    assert client.post(f"/sessions/{session_id}/approve", json={"approved": True}).status_code == 204

    validation = _pending(client, session_id, "validation")
    payload = validation["payload"]
    assert payload["round"] == 1
    assert payload["model"] == "model.stl"
    assert payload["sketches"] == ["inputs/sketch_01.png"]
    assert "result = block" in payload["script"]
    assert sorted(payload["views"]) == [
        "back", "bottom", "front", "isometric", "left", "right", "top",
    ]
    assert payload["views"]["top"] == "views/top.png"

    view = client.get(f"/sessions/{session_id}/artifacts/{payload['views']['isometric']}")
    assert view.status_code == 200
    assert view.headers["content-type"] == "image/png"
    assert view.content.startswith(b"\x89PNG\r\n\x1a\n")
    model = client.get(f"/sessions/{session_id}/artifacts/model.stl")
    assert model.status_code == 200
    assert model.headers["content-type"] == "model/stl"
    plan = client.get(f"/sessions/{session_id}/artifacts/plan.txt")
    assert plan.headers["content-type"].startswith("text/plain")

    assert client.post(f"/sessions/{session_id}/reply", json={"text": ""}).status_code == 204
    state = _finished(client, session_id)
    assert state["phase"] == "DONE"
    assert state["error"] is None
    assert state["pending_interaction"] is None
    refs = state["artifact_refs"]
    assert "model.stl" in refs and "plan.txt" in refs and "phase_report.json" in refs
    assert "inputs/sketch_01.png" in refs and "views/top.png" in refs
    assert "round_1/review.txt" in refs and "round_1/views/isometric.png" in refs

    # nothing is pending after completion, so any resolution conflicts
    assert client.post(f"/sessions/{session_id}/reply", json={"text": "x"}).status_code == 409
    assert client.post(f"/sessions/{session_id}/approve", json={"approved": True}).status_code == 409


def test_zero_shot_session_over_http(tmp_path: Path, sketch_bytes):
    client = _client(tmp_path, BLOCK_ZERO_SHOT_FIXTURE)
    created = client.post(
        "/sessions",
        data={"text": BLOCK_SPEC_TEXT, "mode": "zero-shot"},
        files=[("sketches", ("sketch.png", sketch_bytes, "image/png"))],
    )
    assert created.status_code == 201
    session_id = created.json()["id"]
    # zero-shot still gates script execution on an approval
    approval = _pending(client, session_id, "approval")
    assert "cq.Workplane" in approval["payload"]["script"]
    assert client.post(f"/sessions/{session_id}/approve", json={"approved": True}).status_code == 204
    state = _finished(client, session_id)
    assert state["phase"] == "DONE"
    assert state["pending_interaction"] is None
    assert "model.stl" in state["artifact_refs"]


def test_failed_session_surfaces_error(tmp_path: Path):
    replay = tmp_path / "empty.jsonl"
    replay.write_text("", encoding="utf-8")
    client = _client(tmp_path, replay)
    created = client.post("/sessions", data={"text": "a block"})
    session_id = created.json()["id"]
    state = _finished(client, session_id)
    assert state["phase"] == "FAILED"
    assert "replay exhausted" in state["error"]


# --- artifact path containment -------------------------------------------------


def test_artifact_paths_cannot_escape_run_dir(tmp_path: Path, sketch_bytes):
    secret = tmp_path / "secret.txt"
    secret.write_text("keep out", encoding="utf-8")
    client = _client(tmp_path, BLOCK_FIXTURE)
    created = client.post(
        "/sessions",
        data={"text": BLOCK_SPEC_TEXT},
        files=[("sketches", ("sketch.png", sketch_bytes, "image/png"))],
    )
    session_id = created.json()["id"]
    _pending(client, session_id, "question")

    for path in ("..%2F..%2F..%2Fsecret.txt", "%2Fetc%2Fpasswd", "views%2F..%2F..%2F..%2Fsecret.txt"):
        response = client.get(f"/sessions/{session_id}/artifacts/{path}")
        assert response.status_code == 404, path
        assert b"keep out" not in response.content

    assert client.get(f"/sessions/{session_id}/artifacts/absent.bin").status_code == 404
    client.post(f"/sessions/{session_id}/reply", json={"text": ANSWER})
