"""Multi-agent pipeline turning sketches and text into parametric CAD models."""

from .backends import BackendDescriptor, builtin_backend, cadquery_backend
from .cadagent import (
    CadAgent,
    CadScript,
    CheckReport,
    ModelArtifact,
    Plan,
    execute,
    generate_code,
    make_plan,
    static_check,
)
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
from .gateway import ChatMessage, ProviderConfig, TranscriptRecorder, VlmGateway
from .mesh import Mesh, View, ViewSet, load_stl, render_views, save_views
from .orchestrator import (
    Mode,
    RunConfig,
    ScriptedUserIO,
    SessionResult,
    TerminalUserIO,
    compare_runs,
    default_config,
    load_config,
    run_session,
    run_zero_shot,
)
from .qa import ReviewResult, VerifyOutcome, review, verify_loop
from .requirements import ClarificationOutcome, clarify_loop, detect, extract_summary

__version__ = "0.1.0"

__all__ = [
    "BackendDescriptor",
    "CadAgent",
    "CadScript",
    "ChatMessage",
    "CheckReport",
    "ClarificationOutcome",
    "FeedbackItem",
    "FeedbackSource",
    "Mesh",
    "Mode",
    "ModelArtifact",
    "Phase",
    "Plan",
    "ProviderConfig",
    "ReviewResult",
    "RunConfig",
    "ScriptedUserIO",
    "SessionEvent",
    "SessionResult",
    "SessionState",
    "SketchImage",
    "Specification",
    "TerminalUserIO",
    "TranscriptRecorder",
    "VerifyOutcome",
    "View",
    "ViewSet",
    "VlmGateway",
    "builtin_backend",
    "cadquery_backend",
    "clarify_loop",
    "compare_runs",
    "default_config",
    "detect",
    "execute",
    "extract_summary",
    "generate_code",
    "load_config",
    "load_stl",
    "make_plan",
    "new_session",
    "render_views",
    "review",
    "run_session",
    "run_zero_shot",
    "save_views",
    "static_check",
    "transition",
    "verify_loop",
]
