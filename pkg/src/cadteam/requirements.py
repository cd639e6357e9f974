"""Requirements clarification loop.

The model signals completion by wrapping an addendum in <SUMMARY> tags;
everything else counts as questions for the user. Conversation history
stays inside this phase; only the summary addendum flows downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

from .domain import Specification
from .errors import MalformedEnvelope, MaxRoundsExceeded
from .gateway import ChatMessage, VlmGateway
from .prompts import ASSUME_AND_SUMMARIZE, CLARIFY_PROMPT

SUMMARY_OPEN = "<SUMMARY>"
SUMMARY_CLOSE = "</SUMMARY>"

DEFAULT_MAX_CLARIFY_ROUNDS = 5

_ENVELOPE_REPAIR_REQUEST = (
    "Your summary envelope was not closed. Repeat the final addendum "
    f"enclosed between {SUMMARY_OPEN} and {SUMMARY_CLOSE}."
)


class OutcomeKind(str, Enum):
    QUESTIONS = "questions"
    FINAL_SUMMARY = "final_summary"


@dataclass(frozen=True)
class ClarificationOutcome:
    kind: OutcomeKind
    text: str


def extract_summary(reply: str) -> str | None:
    """Interior of the first summary envelope, or None when no envelope exists."""
    start = reply.find(SUMMARY_OPEN)
    if start == -1:
        return None
    interior_start = start + len(SUMMARY_OPEN)
    end = reply.find(SUMMARY_CLOSE, interior_start)
    if end == -1:
        raise MalformedEnvelope("opening <SUMMARY> tag has no closing tag")
    return reply[interior_start:end].strip()


def _classify(reply: str) -> ClarificationOutcome:
    summary = extract_summary(reply)
    if summary is not None:
        return ClarificationOutcome(OutcomeKind.FINAL_SUMMARY, summary)
    return ClarificationOutcome(OutcomeKind.QUESTIONS, reply.strip())


def _ask_model(
    gateway: VlmGateway, spec: Specification, conversation: Sequence[ChatMessage]
) -> str:
    messages = [
        ChatMessage(role="system", text=CLARIFY_PROMPT),
        ChatMessage(role="user", text=spec.full_text(), images=list(spec.sketches)),
        *conversation,
    ]
    return gateway.complete(messages, tag="clarify")


def detect(
    gateway: VlmGateway,
    spec: Specification,
    conversation: Sequence[ChatMessage] = (),
) -> ClarificationOutcome:
    """One clarification turn: returns questions or the final summary."""
    return _classify(_ask_model(gateway, spec, conversation))


def clarify_loop(
    gateway: VlmGateway,
    spec: Specification,
    user_io,
    max_rounds: int = DEFAULT_MAX_CLARIFY_ROUNDS,
) -> Specification:
    """Alternate model questions and user answers until a summary arrives.

    The final allowed round is prefixed with an instruction to assume and
    summarize, so a chatty model still terminates. Runs exactly one
    provider call per round; a run that never summarizes raises after
    `max_rounds` calls.
    """
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")
    conversation: list[ChatMessage] = []
    for round_no in range(1, max_rounds + 1):
        final_round = round_no == max_rounds
        if final_round:
            conversation.append(ChatMessage(role="user", text=ASSUME_AND_SUMMARIZE))
        reply = _ask_model(gateway, spec, conversation)
        try:
            outcome = _classify(reply)
        except MalformedEnvelope:
            conversation.append(ChatMessage(role="assistant", text=reply))
            conversation.append(ChatMessage(role="user", text=_ENVELOPE_REPAIR_REQUEST))
            continue
        if outcome.kind is OutcomeKind.FINAL_SUMMARY:
            return replace(spec, addenda=spec.addenda + [outcome.text])
        if final_round:
            break
        answer = user_io.ask(outcome.text)
        conversation.append(ChatMessage(role="assistant", text=reply))
        conversation.append(ChatMessage(role="user", text=answer))
    raise MaxRoundsExceeded(
        f"no summary envelope after {max_rounds} clarification rounds"
    )
