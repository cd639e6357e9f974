"""Vision-based verification: render, review, and loop design until clean.

Verification feedback is replaced each round with the latest review's
issues; validation feedback from the user accumulates outside this loop
and is concatenated in front of it on every design invocation.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

from .cadagent import ApprovalGate, CadAgent, ModelArtifact
from .domain import FeedbackItem, FeedbackSource, SessionEvent, SketchImage, Specification
from .gateway import ChatMessage, VlmGateway
from .mesh import RENDER_SIZE, ViewSet, load_stl, render_views, save_views
from .prompts import REVIEW_PROMPT

logger = logging.getLogger(__name__)

DEFAULT_MAX_VERIFY_ROUNDS = 3

_VIEW_PREAMBLE = (
    "Attached are the seven rendered views of the current model, labeled "
    "top, bottom, right, left, front, back, isometric, in that order."
)


@dataclass(frozen=True)
class ReviewResult:
    accepted: bool
    issues: tuple[str, ...]
    raw: str = ""

    def __post_init__(self) -> None:
        if self.accepted != (not self.issues):
            raise ValueError("accepted must hold exactly when there are no issues")


@dataclass(eq=False)
class VerifyOutcome:
    artifact: ModelArtifact
    views: ViewSet
    verified: bool
    rounds: int


def parse_issues(reply: str) -> list[str]:
    """Numbered lines become issues; a non-numbered reply is one issue."""
    issues: list[str] = []
    for line in reply.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        head, sep, rest = stripped.partition(" ")
        bare = head.rstrip(".):")
        if sep and bare.isdigit() and head != bare and rest.strip():
            issues.append(rest.strip())
    if issues:
        return issues
    return [reply.strip()]


def _view_images(views: ViewSet) -> list[SketchImage]:
    return [
        SketchImage(data=view.png_bytes(), format="png", label=f"view:{view.label.value}")
        for view in views.views
    ]


def review(gateway: VlmGateway, spec: Specification, views: ViewSet) -> ReviewResult:
    """Ask the reviewer to compare the rendered views against the part requirements."""
    messages = [
        ChatMessage(role="system", text=REVIEW_PROMPT),
        ChatMessage(
            role="user",
            text=spec.full_text() + "\n\n" + _VIEW_PREAMBLE,
            images=list(spec.sketches) + _view_images(views),
        ),
    ]
    reply = gateway.complete(messages, tag="review").strip()
    if not reply:
        return ReviewResult(accepted=True, issues=(), raw="")
    return ReviewResult(accepted=False, issues=tuple(parse_issues(reply)), raw=reply)


def _artifact_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def verify_loop(
    agent: CadAgent,
    spec: Specification,
    validation_feedback: Sequence[FeedbackItem],
    run_dir: Path,
    approval: ApprovalGate,
    max_rounds: int = DEFAULT_MAX_VERIFY_ROUNDS,
    render_size: int = RENDER_SIZE,
    round_counter: Iterator[int] | None = None,
    on_event: Callable[[SessionEvent], None] | None = None,
) -> VerifyOutcome:
    """Design, render, and review until the reviewer accepts.

    Exhausting `max_rounds` degrades to an unverified artifact instead of
    failing: the human validation loop is the backstop. `round_counter`
    lets a session keep round directories unique across validation rounds.
    """
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")
    run_dir = Path(run_dir)
    counter = round_counter if round_counter is not None else itertools.count(1)
    emit = on_event or (lambda event: None)
    verification: list[FeedbackItem] = []
    artifact: ModelArtifact | None = None
    views: ViewSet | None = None
    for _ in range(max_rounds):
        round_no = next(counter)
        feedback = tuple(validation_feedback) + tuple(verification)
        script, artifact = agent.design(spec, feedback, run_dir, approval)
        emit(SessionEvent.ARTIFACT_READY)
        mesh = load_stl(artifact.mesh_path)
        views = render_views(mesh, render_size)
        round_dir = run_dir / f"round_{round_no}"
        round_dir.mkdir(parents=True, exist_ok=True)
        save_views(views, round_dir / "views")
        (round_dir / "artifact.sha256").write_text(
            _artifact_sha256(artifact.mesh_path) + "  model.stl\n", encoding="utf-8"
        )
        result = review(agent.gateway, spec, views)
        (round_dir / "review.txt").write_text(result.raw + "\n", encoding="utf-8")
        if result.accepted:
            emit(SessionEvent.QA_PASSED)
            return VerifyOutcome(artifact=artifact, views=views, verified=True, rounds=round_no)
        verification = [
            FeedbackItem(FeedbackSource.VERIFICATION, issue, round_no) for issue in result.issues
        ]
        emit(SessionEvent.QA_REJECTED)
    assert artifact is not None and views is not None
    logger.warning("verification cap (%d rounds) reached; continuing unverified", max_rounds)
    emit(SessionEvent.QA_PASSED)
    return VerifyOutcome(artifact=artifact, views=views, verified=False, rounds=max_rounds)
