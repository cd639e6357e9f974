"""Session orchestration: the outer validation loop, run-directory
persistence, user interaction channels, and the zero-shot ablation mode.

Validation feedback accumulates across rounds (the user's earlier
corrections stay in force); verification feedback is handled inside
qa.verify_loop and replaced every round.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import re
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .backends import BackendDescriptor, builtin_backend, cadquery_backend
from .cadagent import CadAgent, CadScript, ModelArtifact
from .docs import DocCorpus, retrieve
from .domain import (
    FeedbackItem,
    FeedbackSource,
    Phase,
    SessionEvent,
    SessionState,
    SketchImage,
    Specification,
    new_session,
    transition,
)
from .errors import CadTeamError, ConfigError, DocsUnavailable, ScriptExhausted
from .gateway import ProviderConfig, TranscriptRecorder, VlmGateway, build_provider
from .mesh import RENDER_SIZE, ViewSet, load_stl, render_views, save_views
from .qa import verify_loop
from .requirements import clarify_loop

logger = logging.getLogger(__name__)

SUMMARY_SCHEMA = "cadteam.summary/1"
PHASE_REPORT_SCHEMA = "cadteam.phase-report/1"
COMPARE_SCHEMA = "cadteam.compare/1"
PHASE_KEYS = ("1_clarification", "2_design", "3_verification", "4_validation")
CALL_TAGS = ("clarify", "plan", "codegen", "hints", "review")

# An empty reply is the acceptance signal; "accept" exists so an interactive
# user cannot accept by accident with a stray Enter elsewhere.
ACCEPT_REPLIES = frozenset({"", "accept"})
_APPROVE_WORDS = frozenset({"y", "yes", "true", "approve", "approved"})


class Mode(str, Enum):
    TEAM = "team"
    ZERO_SHOT = "zero_shot"


@dataclass
class RunConfig:
    provider: ProviderConfig
    backend: BackendDescriptor
    run_root: Path
    docs_url: str = ""  # empty -> backend.docs_url
    docs_cache_dir: Path | None = None
    docs_budget: int = 6000
    max_clarify_rounds: int = 5
    max_design_attempts: int = 3
    max_verify_rounds: int = 3
    render_size: int = RENDER_SIZE
    auto_approve: bool = False
    mode: Mode = Mode.TEAM

    def __post_init__(self) -> None:
        self.run_root = Path(self.run_root)
        if self.docs_cache_dir is not None:
            self.docs_cache_dir = Path(self.docs_cache_dir)
        for name in ("max_clarify_rounds", "max_design_attempts", "max_verify_rounds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.render_size < 8:
            raise ConfigError(f"render_size must be >= 8, got {self.render_size}")
        if self.docs_budget < 1:
            raise ConfigError(f"docs_budget must be >= 1, got {self.docs_budget}")


_CONFIG_KEYS = frozenset(
    {
        "provider",
        "backend",
        "run_root",
        "docs_url",
        "docs_cache_dir",
        "docs_budget",
        "max_clarify_rounds",
        "max_design_attempts",
        "max_verify_rounds",
        "render_size",
        "auto_approve",
        "mode",
    }
)


def _build_dataclass(cls, raw: dict, context: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown {context} keys: {', '.join(sorted(unknown))}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {context}: {exc}") from exc


def _build_backend(raw) -> BackendDescriptor:
    if raw == "builtin" or raw is None:
        return builtin_backend()
    if raw == "cadquery":
        return cadquery_backend()
    if isinstance(raw, dict):
        return _build_dataclass(BackendDescriptor, raw, "backend")
    raise ConfigError(f"backend must be 'builtin', 'cadquery', or a descriptor object, got {raw!r}")


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be an object, got {type(raw).__name__}")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    provider_raw = raw.get("provider", {})
    if not isinstance(provider_raw, dict):
        raise ConfigError("provider must be an object")
    provider = _build_dataclass(ProviderConfig, provider_raw, "provider")
    if provider.provider not in ("live", "replay"):
        raise ConfigError(f"provider.provider must be 'live' or 'replay', got {provider.provider!r}")
    if provider.provider == "replay" and not provider.replay_path:
        raise ConfigError("replay provider requires provider.replay_path")
    mode_raw = str(raw.get("mode", "team")).replace("-", "_")
    try:
        mode = Mode(mode_raw)
    except ValueError:
        raise ConfigError(f"mode must be 'team' or 'zero_shot', got {raw.get('mode')!r}") from None
    kwargs = {
        key: raw[key]
        for key in (
            "docs_url",
            "docs_cache_dir",
            "docs_budget",
            "max_clarify_rounds",
            "max_design_attempts",
            "max_verify_rounds",
            "render_size",
            "auto_approve",
        )
        if key in raw
    }
    return RunConfig(
        provider=provider,
        backend=_build_backend(raw.get("backend")),
        run_root=Path(raw.get("run_root", "runs")),
        mode=mode,
        **kwargs,
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def default_config(run_root: str | Path = "runs") -> RunConfig:
    return RunConfig(provider=ProviderConfig(), backend=builtin_backend(), run_root=Path(run_root))


@dataclass(eq=False)
class ValidationPresentation:
    """Everything the user needs to judge the artifact."""

    round: int
    artifact: ModelArtifact
    views: ViewSet
    view_paths: dict[str, Path]
    script_source: str
    message: str
    sketch_refs: list[str] = field(default_factory=list)


class UserIO(Protocol):
    """The human's three touchpoints: answer, approve, judge."""

    def ask(self, question: str) -> str: ...

    def approve(self, script: CadScript) -> bool: ...

    def validate(self, presentation: ValidationPresentation) -> str: ...


class TerminalUserIO:
    """Blocking stdin/stdout interaction for CLI runs."""

    def ask(self, question: str) -> str:
        print(question)
        return input("> ")

    def approve(self, script: CadScript) -> bool:
        print(f"Attempt {script.attempt} wants to execute this script:\n")
        print(script.source)
        return input("\nExecute? [y/N] ").strip().lower() in _APPROVE_WORDS

    def validate(self, presentation: ValidationPresentation) -> str:
        print(presentation.message)
        for label, path in sorted(presentation.view_paths.items()):
            print(f"  {label}: {path}")
        print("Press Enter (or type 'accept') to accept, or describe what is wrong:")
        return input("> ")


class ScriptedUserIO:
    """Canned replies consumed strictly in order; errors on exhaustion."""

    def __init__(self, replies: Sequence[str]):
        self._replies = list(replies)
        self._cursor = 0

    def _next(self, kind: str) -> str:
        if self._cursor >= len(self._replies):
            raise ScriptExhausted(
                f"scripted replies exhausted after {self._cursor}; needed one more for a {kind}"
            )
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply

    def ask(self, question: str) -> str:
        return self._next("question")

    def approve(self, script: CadScript) -> bool:
        return self._next("approval").strip().lower() in _APPROVE_WORDS

    def validate(self, presentation: ValidationPresentation) -> str:
        return self._next("validation")


def read_scripted_replies(path: str | Path) -> list[str]:
    """A JSON array of strings, or one reply per line for quick fixtures."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scripted replies {path}: invalid JSON: {exc}") from exc
        if not isinstance(data, list) or not all(isinstance(item, str) for item in data):
            raise ConfigError(f"scripted replies {path}: expected a JSON array of strings")
        return data
    return text.splitlines()


class AutoApproval:
    def request(self, script: CadScript) -> bool:
        return True


class UserApproval:
    def __init__(self, user_io: UserIO):
        self._user_io = user_io

    def request(self, script: CadScript) -> bool:
        return self._user_io.approve(script)


def slugify(text: str, max_len: int = 40) -> str:
    cleaned = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    if not cleaned:
        return "session"
    if len(cleaned) > max_len:
        cut = cleaned[:max_len]
        cleaned = cut[: cut.rfind("-")] if "-" in cut else cut
    return cleaned


def create_run_dir(run_root: str | Path, slug: str, now: datetime | None = None) -> Path:
    """`{run_root}/{YYYY-MM-DD-HH-MM-SS}-{slug}`, suffixed -2, -3… on collision."""
    root = Path(run_root)
    root.mkdir(parents=True, exist_ok=True)
    stamp = (now or datetime.now()).strftime("%Y-%m-%d-%H-%M-%S")
    base = f"{stamp}-{slug}" if slug else stamp
    suffix = 1
    while True:
        name = base if suffix == 1 else f"{base}-{suffix}"
        candidate = root / name
        try:
            candidate.mkdir(parents=True, exist_ok=False)
            return candidate
        except FileExistsError:
            suffix += 1


class SummaryWriter:
    """Line-delimited session summary; append-friendly during a crash."""

    def __init__(self, path: Path):
        self.path = Path(path)

    def write(self, **fields) -> None:
        record = {
            "schema": SUMMARY_SCHEMA,
            "at": datetime.now(timezone.utc).isoformat(timespec="milliseconds"),
            **fields,
        }
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_summary(path: str | Path) -> list[dict]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(json.loads(line))
    return records


@dataclass(eq=False)
class SessionResult:
    state: SessionState
    run_dir: Path
    artifact: ModelArtifact | None = None
    views: ViewSet | None = None
    verified: bool = False
    validation_rounds: int = 0
    error: str | None = None

    @property
    def done(self) -> bool:
        return self.state.phase is Phase.DONE


def _write_inputs(run_dir: Path, spec: Specification) -> list[str]:
    inputs = run_dir / "inputs"
    inputs.mkdir(parents=True, exist_ok=True)
    (inputs / "text.txt").write_text(spec.base_text, encoding="utf-8")
    refs = []
    for i, sketch in enumerate(spec.sketches, start=1):
        name = f"sketch_{i:02d}.{sketch.format}"
        (inputs / name).write_bytes(sketch.data)
        refs.append(f"inputs/{name}")
    return refs


def _load_corpus(config: RunConfig) -> DocCorpus | None:
    url = config.docs_url or config.backend.docs_url
    if not url:
        return None
    cache_dir = config.docs_cache_dir or (config.run_root / ".docs-cache")
    try:
        return retrieve(url, cache_dir)
    except DocsUnavailable as exc:
        logger.warning("documentation unavailable, hints will carry none: %s", exc)
        return None


def _phase_marks(mode: Mode, entered: set[Phase]) -> dict[str, str]:
    if mode is Mode.ZERO_SHOT:
        return {
            "1_clarification": "skipped",
            "2_design": "executed" if Phase.DESIGNING in entered else "not_reached",
            "3_verification": "skipped",
            "4_validation": "skipped",
        }
    by_phase = {
        "1_clarification": Phase.CLARIFYING,
        "2_design": Phase.DESIGNING,
        "3_verification": Phase.VERIFYING,
        "4_validation": Phase.VALIDATING,
    }
    return {
        key: "executed" if phase in entered else "not_reached"
        for key, phase in by_phase.items()
    }


def _write_phase_report(
    run_dir: Path,
    mode: Mode,
    gateway: VlmGateway,
    state: SessionState,
    entered: set[Phase],
    verified: bool,
    validation_rounds: int,
    duration_s: float,
) -> None:
    calls = {tag: gateway.calls_tagged(tag) for tag in CALL_TAGS}
    calls["total"] = len(gateway.call_tags)
    report = {
        "schema": PHASE_REPORT_SCHEMA,
        "mode": mode.value,
        "outcome": state.phase.value,
        "phases": _phase_marks(mode, entered),
        "provider_calls": calls,
        "verified": verified,
        "validation_rounds": validation_rounds,
        "duration_s": round(duration_s, 3),
    }
    (run_dir / "phase_report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )


def run_session(
    sketches: Sequence[SketchImage],
    text: str,
    config: RunConfig,
    user_io: UserIO,
    on_phase: Callable[[Phase], None] | None = None,
    on_run_dir: Callable[[Path], None] | None = None,
) -> SessionResult:
    """Team mode: clarify, then verify-and-validate until the user accepts.

    Pipeline failures return a FAILED result with the run directory intact
    for post-mortem; invalid inputs raise before anything is written.
    """
    state = new_session(list(sketches), text)
    run_dir = create_run_dir(config.run_root, slugify(text))
    if on_run_dir is not None:
        on_run_dir(run_dir)
    sketch_refs = _write_inputs(run_dir, state.specification)
    summary = SummaryWriter(run_dir / "summary.jsonl")
    recorder = TranscriptRecorder(run_dir / "transcript.jsonl", run_dir / "blobs")
    gateway = VlmGateway(config.provider, build_provider(config.provider), recorder)
    started = time.monotonic()
    entered = {state.phase}
    verified = False
    validation_rounds = 0

    def advance(event: SessionEvent) -> None:
        nonlocal state
        state = transition(state, event)
        entered.add(state.phase)
        summary.write(event="phase", phase=state.phase.value, trigger=event.value)
        if on_phase is not None:
            on_phase(state.phase)

    summary.write(event="start", mode=config.mode.value, run_dir=run_dir.name)
    try:
        spec = clarify_loop(gateway, state.specification, user_io, config.max_clarify_rounds)
        state = replace(state, specification=spec)
        summary.write(event="clarified", addenda=len(spec.addenda))
        advance(SessionEvent.REQUIREMENTS_FINAL)

        agent = CadAgent(
            gateway,
            config.backend,
            corpus=_load_corpus(config),
            max_attempts=config.max_design_attempts,
            docs_budget=config.docs_budget,
        )
        approval = AutoApproval() if config.auto_approve else UserApproval(user_io)
        f_val: list[FeedbackItem] = []
        round_counter = itertools.count(1)
        while True:
            outcome = verify_loop(
                agent,
                spec,
                f_val,
                run_dir,
                approval,
                max_rounds=config.max_verify_rounds,
                render_size=config.render_size,
                round_counter=round_counter,
                on_event=advance,
            )
            verified = outcome.verified
            view_paths = save_views(outcome.views, run_dir / "views")
            state.artifacts.append(str(outcome.artifact.mesh_path))
            summary.write(event="verify", verified=outcome.verified, last_round=outcome.rounds)
            validation_rounds += 1
            note = "" if outcome.verified else " Verification did not fully pass; review carefully."
            presentation = ValidationPresentation(
                round=validation_rounds,
                artifact=outcome.artifact,
                views=outcome.views,
                view_paths=view_paths,
                script_source=outcome.artifact.script.source,
                message=f"Validation round {validation_rounds}: the model is ready for review.{note}",
                sketch_refs=sketch_refs,
            )
            reply = user_io.validate(presentation).strip()
            if reply.lower() in ACCEPT_REPLIES:
                advance(SessionEvent.USER_ACCEPTS)
                summary.write(
                    event="outcome",
                    outcome="done",
                    verified=verified,
                    validation_rounds=validation_rounds,
                    duration_s=round(time.monotonic() - started, 3),
                )
                return SessionResult(
                    state=state,
                    run_dir=run_dir,
                    artifact=outcome.artifact,
                    views=outcome.views,
                    verified=verified,
                    validation_rounds=validation_rounds,
                )
            item = FeedbackItem(FeedbackSource.VALIDATION, reply, validation_rounds)
            f_val.append(item)
            state.feedback_log.append(item)
            summary.write(event="validation_feedback", round=validation_rounds, text=reply)
            advance(SessionEvent.USER_FEEDBACK)
    except CadTeamError as exc:
        error = f"{type(exc).__name__}: {exc}"
        state = transition(state, SessionEvent.FAIL)
        entered.add(state.phase)
        summary.write(event="outcome", outcome="failed", error=error)
        if on_phase is not None:
            on_phase(state.phase)
        logger.error("session failed: %s", error)
        return SessionResult(
            state=state,
            run_dir=run_dir,
            verified=verified,
            validation_rounds=validation_rounds,
            error=error,
        )
    finally:
        _write_phase_report(
            run_dir,
            config.mode,
            gateway,
            state,
            entered,
            verified,
            validation_rounds,
            time.monotonic() - started,
        )


def run_zero_shot(
    sketches: Sequence[SketchImage],
    text: str,
    config: RunConfig,
    user_io: UserIO | None = None,
    on_phase: Callable[[Phase], None] | None = None,
    on_run_dir: Callable[[Path], None] | None = None,
) -> SessionResult:
    """Baseline mode: plan and generate once, no clarification, no review.

    The state machine still walks its phases so summaries stay comparable,
    but no clarify/review provider call is ever made.
    """
    state = new_session(list(sketches), text)
    run_dir = create_run_dir(config.run_root, slugify(text))
    if on_run_dir is not None:
        on_run_dir(run_dir)
    _write_inputs(run_dir, state.specification)
    summary = SummaryWriter(run_dir / "summary.jsonl")
    recorder = TranscriptRecorder(run_dir / "transcript.jsonl", run_dir / "blobs")
    gateway = VlmGateway(config.provider, build_provider(config.provider), recorder)
    started = time.monotonic()
    entered = {state.phase}

    def advance(event: SessionEvent) -> None:
        nonlocal state
        state = transition(state, event)
        entered.add(state.phase)
        summary.write(event="phase", phase=state.phase.value, trigger=event.value)
        if on_phase is not None:
            on_phase(state.phase)

    summary.write(event="start", mode=config.mode.value, run_dir=run_dir.name)
    try:
        advance(SessionEvent.REQUIREMENTS_FINAL)
        agent = CadAgent(
            gateway,
            config.backend,
            corpus=None,
            max_attempts=config.max_design_attempts,
        )
        approval: AutoApproval | UserApproval
        if config.auto_approve or user_io is None:
            approval = AutoApproval()
        else:
            approval = UserApproval(user_io)
        script, artifact = agent.design(state.specification, [], run_dir, approval)
        advance(SessionEvent.ARTIFACT_READY)
        views = render_views(load_stl(artifact.mesh_path), config.render_size)
        save_views(views, run_dir / "views")
        state.artifacts.append(str(artifact.mesh_path))
        advance(SessionEvent.QA_PASSED)
        advance(SessionEvent.USER_ACCEPTS)
        summary.write(
            event="outcome",
            outcome="done",
            verified=False,
            validation_rounds=0,
            duration_s=round(time.monotonic() - started, 3),
        )
        return SessionResult(state=state, run_dir=run_dir, artifact=artifact, views=views)
    except CadTeamError as exc:
        error = f"{type(exc).__name__}: {exc}"
        state = transition(state, SessionEvent.FAIL)
        entered.add(state.phase)
        summary.write(event="outcome", outcome="failed", error=error)
        if on_phase is not None:
            on_phase(state.phase)
        logger.error("zero-shot session failed: %s", error)
        return SessionResult(state=state, run_dir=run_dir, error=error)
    finally:
        _write_phase_report(
            run_dir,
            Mode.ZERO_SHOT,
            gateway,
            state,
            entered,
            verified=False,
            validation_rounds=0,
            duration_s=time.monotonic() - started,
        )


def load_phase_report(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "phase_report.json"
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"no phase report under {run_dir}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"phase report {path} is not valid JSON: {exc}") from exc
    return report


def compare_runs(team_dir: str | Path, zero_dir: str | Path) -> dict:
    """Merge two phase reports into one ablation comparison record."""
    team = load_phase_report(team_dir)
    zero = load_phase_report(zero_dir)
    return {
        "schema": COMPARE_SCHEMA,
        "runs": {
            "team": team,
            "zero_shot": zero,
        },
        "phases": {
            key: {"team": team["phases"].get(key), "zero_shot": zero["phases"].get(key)}
            for key in PHASE_KEYS
        },
        "provider_calls": {
            "team": team.get("provider_calls", {}),
            "zero_shot": zero.get("provider_calls", {}),
        },
    }
