"""Provider-agnostic access to a chat-capable vision-language model.

Two providers share one calling convention: a live HTTP provider with
retries and per-attempt timeouts, and a replay provider that answers from a
recorded transcript strictly in call order. Every completed call is appended
to the session transcript (JSONL), with image bytes stored adjacent by
content hash so a recorded session can be replayed bit-exactly.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .domain import SketchImage
from .errors import (
    MalformedTranscript,
    PermanentProviderError,
    ProviderTimeout,
    TransientProviderError,
)

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")


@dataclass
class ChatMessage:
    role: str
    text: str
    images: list[SketchImage] = field(default_factory=list)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown chat role: {self.role!r}")
        if self.role in ("system", "assistant") and self.images:
            raise ValueError(f"{self.role} messages must not carry images")


@dataclass
class ProviderConfig:
    """How to reach the model. The credential is read from the environment
    variable named by `api_key_env` and is never persisted anywhere."""

    provider: str = "live"  # "live" or "replay"
    model_id: str = ""
    api_key_env: str = "VLM_API_KEY"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    max_retries: int = 3
    backoff_base: float = 0.5
    timeout: float = 120.0
    # Sampling default is a project choice; the original experiments did not
    # document one.
    temperature: float = 0.2
    replay_path: str | None = None


def message_digest(messages: list[ChatMessage]) -> str:
    """Stable digest of a request with image bytes replaced by their hash."""
    canon = json.dumps([_serialize_message(m) for m in messages], sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _serialize_message(message: ChatMessage) -> dict:
    return {
        "role": message.role,
        "text": message.text,
        "images": [
            {
                "sha256": hashlib.sha256(img.data).hexdigest(),
                "format": img.format,
                "label": img.label,
            }
            for img in message.images
        ],
    }


class TranscriptRecorder:
    """Appends one JSONL record per completed call; stores image blobs by
    content hash next to the transcript so replays are bit-exact."""

    def __init__(self, path: Path, blob_dir: Path | None = None):
        self.path = Path(path)
        self.blob_dir = Path(blob_dir) if blob_dir else self.path.parent / "blobs"
        self.index = 0

    def record(self, messages: list[ChatMessage], response: str,
               latency_s: float, tag: str, attempts: list[dict]) -> None:
        for message in messages:
            for img in message.images:
                self._store_blob(img)
        entry = {
            "index": self.index,
            "tag": tag,
            "request": [_serialize_message(m) for m in messages],
            "request_digest": message_digest(messages),
            "response": response,
            "latency_s": round(latency_s, 6),
            "attempts": attempts,
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")
        self.index += 1

    def _store_blob(self, img: SketchImage) -> None:
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        blob = self.blob_dir / f"{hashlib.sha256(img.data).hexdigest()}.{img.format}"
        if not blob.exists():
            tmp = blob.with_suffix(blob.suffix + ".tmp")
            tmp.write_bytes(img.data)
            tmp.rename(blob)


def load_transcript(path: Path | str) -> list[dict]:
    """Parse a transcript file; raises MalformedTranscript on bad records."""
    entries = []
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedTranscript(f"cannot read transcript: {exc}") from exc
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedTranscript(f"line {lineno}: invalid JSON") from exc
        if not isinstance(entry, dict) or not isinstance(entry.get("response"), str):
            raise MalformedTranscript(f"line {lineno}: missing string 'response' field")
        entries.append(entry)
    return entries


class Provider(Protocol):
    def send(self, messages: list[ChatMessage]) -> str: ...


class ReplayProvider:
    """Returns recorded responses strictly in call order.

    Request content is ignored on purpose (prompts embed run-specific paths);
    running past the recorded entries is an error so drift gets caught.
    """

    def __init__(self, responses: list[str]):
        self.responses = responses
        self.cursor = 0

    @property
    def remaining(self) -> int:
        return len(self.responses) - self.cursor

    def send(self, messages: list[ChatMessage]) -> str:
        if self.cursor >= len(self.responses):
            raise PermanentProviderError(
                f"replay exhausted after {len(self.responses)} recorded entries"
            )
        response = self.responses[self.cursor]
        self.cursor += 1
        return response


def replay_provider_from(path: Path | str) -> ReplayProvider:
    """Build a replay provider from a recorded transcript file."""
    return ReplayProvider([entry["response"] for entry in load_transcript(path)])


class LiveProvider:
    """OpenAI-style chat-completions transport.

    `send_payload` is injectable so tests can fault-inject without sockets.
    """

    def __init__(self, config: ProviderConfig,
                 send_payload: Callable[[dict], str] | None = None):
        self.config = config
        self._send_payload = send_payload or self._http_send

    def send(self, messages: list[ChatMessage]) -> str:
        payload = {
            "model": self.config.model_id,
            "temperature": self.config.temperature,
            "messages": [self._wire_message(m) for m in messages],
        }
        return self._send_payload(payload)

    @staticmethod
    def _wire_message(message: ChatMessage) -> dict:
        if not message.images:
            return {"role": message.role, "content": message.text}
        content: list[dict] = [{"type": "text", "text": message.text}]
        for img in message.images:
            b64 = base64.b64encode(img.data).decode("ascii")
            content.append({
                "type": "image_url",
                "image_url": {"url": f"data:image/{img.format};base64,{b64}"},
            })
        return {"role": message.role, "content": content}

    def _http_send(self, payload: dict) -> str:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise PermanentProviderError(
                f"no credential in environment variable {self.config.api_key_env}"
            )
        try:
            response = httpx.post(
                self.config.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.config.timeout,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(str(exc)) from exc
        except httpx.TransportError as exc:
            raise TransientProviderError(str(exc)) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"provider returned HTTP {response.status_code}")
        if response.status_code >= 400:
            raise PermanentProviderError(
                f"provider returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise PermanentProviderError(f"malformed provider response: {exc}") from exc


def build_provider(config: ProviderConfig,
                   send_payload: Callable[[dict], str] | None = None) -> Provider:
    if config.provider == "replay":
        if not config.replay_path:
            raise PermanentProviderError("replay provider needs replay_path")
        return replay_provider_from(config.replay_path)
    if config.provider == "live":
        return LiveProvider(config, send_payload)
    raise PermanentProviderError(f"unknown provider: {config.provider!r}")


class VlmGateway:
    """One completion interface for all agents, with retry and recording.

    Retries cover transport-level failures only; content-level problems
    (an empty or useless completion) are the calling agent's business.
    """

    def __init__(self, config: ProviderConfig, provider: Provider | None = None,
                 recorder: TranscriptRecorder | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.provider = provider or build_provider(config)
        self.recorder = recorder
        self._sleep = sleep
        self.call_tags: list[str] = []

    def complete(self, messages: list[ChatMessage], tag: str = "") -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        if messages[0].role != "system":
            raise ValueError("first message must have role=system")

        attempts: list[dict] = []
        started = time.monotonic()
        for attempt in range(self.config.max_retries + 1):
            attempt_start = time.monotonic()
            try:
                response = self.provider.send(messages)
            except TransientProviderError as exc:
                attempts.append({
                    "error": str(exc),
                    "latency_s": round(time.monotonic() - attempt_start, 6),
                })
                if attempt == self.config.max_retries:
                    raise
                delay = self.config.backoff_base * (2 ** attempt)
                logger.warning("transient provider error (attempt %d/%d): %s",
                               attempt + 1, self.config.max_retries + 1, exc)
                if delay > 0:
                    self._sleep(delay)
                continue
            attempts.append({
                "error": None,
                "latency_s": round(time.monotonic() - attempt_start, 6),
            })
            self.call_tags.append(tag)
            if self.recorder is not None:
                self.recorder.record(messages, response,
                                     time.monotonic() - started, tag, attempts)
            return response
        raise AssertionError("unreachable")

    def calls_tagged(self, tag: str) -> int:
        return sum(1 for t in self.call_tags if t == tag)
