"""Shared domain types and the session phase state machine.

A session walks through four development phases (requirement clarification,
design, verification, validation); the transition table below is the single
source of truth for which phase changes are legal.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum

from .errors import EmptySpecification, IllegalTransition

SUPPORTED_IMAGE_FORMATS = ("png", "jpeg")


@dataclass
class SketchImage:
    """A raster input sketch (or photo) with a free-text caption."""

    data: bytes
    format: str = "png"
    label: str = ""

    def __post_init__(self):
        if not self.data:
            raise ValueError("sketch image data must be non-empty")
        if self.format not in SUPPORTED_IMAGE_FORMATS:
            raise ValueError(f"unsupported image format: {self.format!r}")


@dataclass
class Specification:
    """The evolving requirement set: sketches, base text, and addenda.

    `base_text` and `sketches` are fixed at session start; clarification
    summaries are only ever appended to `addenda`.
    """

    sketches: list[SketchImage] = field(default_factory=list)
    base_text: str = ""
    addenda: list[str] = field(default_factory=list)

    def full_text(self) -> str:
        """Base text plus all addenda, for prompt construction."""
        parts = [self.base_text] if self.base_text else []
        for i, addendum in enumerate(self.addenda, start=1):
            parts.append(f"Specification addendum {i}: {addendum}")
        return "\n\n".join(parts)


class FeedbackSource(str, Enum):
    VERIFICATION = "verification"
    VALIDATION = "validation"
    EXECUTION_ERROR = "execution_error"
    STATIC_CHECK_ERROR = "static_check_error"


@dataclass
class FeedbackItem:
    """A tagged discrepancy report flowing back into the design loop."""

    source: FeedbackSource
    text: str
    round: int

    def __post_init__(self):
        if not self.text:
            raise ValueError("feedback text must be non-empty")
        if self.round < 0:
            raise ValueError("feedback round must be >= 0")


class Phase(str, Enum):
    CLARIFYING = "CLARIFYING"
    DESIGNING = "DESIGNING"
    VERIFYING = "VERIFYING"
    VALIDATING = "VALIDATING"
    DONE = "DONE"
    FAILED = "FAILED"


TERMINAL_PHASES = (Phase.DONE, Phase.FAILED)


class SessionEvent(str, Enum):
    REQUIREMENTS_FINAL = "requirements_final"
    ARTIFACT_READY = "artifact_ready"
    QA_REJECTED = "qa_rejected"
    QA_PASSED = "qa_passed"
    USER_FEEDBACK = "user_feedback"
    USER_ACCEPTS = "user_accepts"
    FAIL = "fail"


TRANSITIONS: dict[tuple[Phase, SessionEvent], Phase] = {
    (Phase.CLARIFYING, SessionEvent.REQUIREMENTS_FINAL): Phase.DESIGNING,
    (Phase.DESIGNING, SessionEvent.ARTIFACT_READY): Phase.VERIFYING,
    (Phase.VERIFYING, SessionEvent.QA_REJECTED): Phase.DESIGNING,
    (Phase.VERIFYING, SessionEvent.QA_PASSED): Phase.VALIDATING,
    (Phase.VALIDATING, SessionEvent.USER_FEEDBACK): Phase.DESIGNING,
    (Phase.VALIDATING, SessionEvent.USER_ACCEPTS): Phase.DONE,
}
for _phase in Phase:
    if _phase not in TERMINAL_PHASES:
        TRANSITIONS[(_phase, SessionEvent.FAIL)] = Phase.FAILED


@dataclass
class SessionState:
    """One design session, passed by value between pipeline stages."""

    id: str
    phase: Phase
    specification: Specification
    feedback_log: list[FeedbackItem]
    artifacts: list[str]
    created_at: datetime


def new_session(sketches: list[SketchImage], text: str,
                created_at: datetime | None = None) -> SessionState:
    """Open a session in the CLARIFYING phase.

    Raises EmptySpecification when both inputs are empty.
    """
    if not sketches and not text.strip():
        raise EmptySpecification("a sketch or a textual description is required")
    return SessionState(
        id=uuid.uuid4().hex,
        phase=Phase.CLARIFYING,
        specification=Specification(sketches=list(sketches), base_text=text),
        feedback_log=[],
        artifacts=[],
        created_at=created_at or datetime.now(),
    )


def transition(state: SessionState, event: SessionEvent) -> SessionState:
    """Apply an event; returns a new state or raises IllegalTransition."""
    key = (state.phase, event)
    if key not in TRANSITIONS:
        raise IllegalTransition(f"event {event.value!r} is not legal in phase {state.phase.value}")
    return replace(state, phase=TRANSITIONS[key])
