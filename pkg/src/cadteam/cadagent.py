"""CAD design agent: plan once, then generate, check, and execute scripts.

The loop plans only when it has no feedback, derives documentation hints
only when it has feedback, and feeds the latest attempt's errors (never the
whole history) back into the next generation prompt.
"""

from __future__ import annotations

import ast
import itertools
import json
import logging
import os
import subprocess
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .backends import BackendDescriptor
from .docs import DocCorpus, truncate_for_context
from .domain import FeedbackItem, FeedbackSource, Specification
from .errors import (
    ApprovalDenied,
    EmptyCompletion,
    ExecutionFailed,
    ExecutionTimeout,
    MaxAttemptsExceeded,
    OutputMissing,
    UnparseablePlan,
)
from .gateway import ChatMessage, VlmGateway
from .prompts import CODEGEN_PROMPT, PLAN_PROMPT, REPAIR_HINTS_TEMPLATE

logger = logging.getLogger(__name__)

MODEL_FILENAME = "model.stl"
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_DOCS_BUDGET = 6000

_REPLAN_REQUEST = (
    "The previous reply was not a numbered list. "
    "Return the plan as a numbered list of steps."
)

# Escape hatches only: process spawning, network access, and destructive or
# out-of-run-dir filesystem operations. Everything else is allowed; the
# human approval gate remains the backstop.
FORBIDDEN_PREFIXES: tuple[str, ...] = (
    "os.system",
    "os.popen",
    "os.exec",
    "os.spawn",
    "os.fork",
    "os.kill",
    "os.remove",
    "os.unlink",
    "os.rmdir",
    "os.removedirs",
    "os.rename",
    "os.replace",
    "shutil.",
    "subprocess.",
    "multiprocessing.",
    "socket.",
    "urllib.",
    "requests.",
    "http.",
    "httpx.",
    "ftplib.",
    "smtplib.",
    "telnetlib.",
    "ctypes.",
    "webbrowser.",
)
FORBIDDEN_BARE_CALLS: tuple[str, ...] = ("exec", "eval", "compile", "__import__", "input")
_WRITE_MODE_CHARS = set("wax+")


@dataclass(frozen=True)
class Plan:
    steps: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.steps or any(not step.strip() for step in self.steps):
            raise ValueError("plan requires at least one non-empty step")

    def numbered(self) -> str:
        return "\n".join(f"{i}. {step}" for i, step in enumerate(self.steps, start=1))


@dataclass(frozen=True)
class CheckReport:
    syntax_errors: tuple[tuple[int, str], ...]
    missing_result: bool
    forbidden_calls: tuple[str, ...]
    ok: bool = field(init=False)

    def __post_init__(self) -> None:
        passed = not self.syntax_errors and not self.missing_result and not self.forbidden_calls
        object.__setattr__(self, "ok", passed)

    def describe(self) -> str:
        lines = [f"line {line}: {message}" for line, message in self.syntax_errors]
        if self.missing_result:
            lines.append("the script never assigns the finished model to the name `result`")
        lines.extend(f"forbidden call: {name}" for name in self.forbidden_calls)
        return "\n".join(lines)


@dataclass(frozen=True)
class CadScript:
    source: str
    attempt: int
    check: CheckReport | None = None

    def __post_init__(self) -> None:
        if not self.source.strip():
            raise ValueError("script source must be non-empty")
        if self.attempt < 1:
            raise ValueError(f"attempt must be >= 1, got {self.attempt}")


@dataclass(frozen=True)
class ModelArtifact:
    mesh_path: Path
    script: CadScript
    produced_at: float
    exec_log: str

    def __post_init__(self) -> None:
        if not self.mesh_path.is_file() or self.mesh_path.stat().st_size == 0:
            raise OutputMissing(f"mesh file missing or empty: {self.mesh_path}")


class ApprovalGate(Protocol):
    """Asks whether a checked script may be executed."""

    def request(self, script: CadScript) -> bool: ...


def _spec_message(spec: Specification) -> ChatMessage:
    return ChatMessage(role="user", text=spec.full_text(), images=list(spec.sketches))


def format_feedback(items: Sequence[FeedbackItem]) -> str:
    return "\n".join(f"{i}. [{item.source.value}] {item.text}" for i, item in enumerate(items, start=1))


def parse_plan_steps(reply: str) -> list[str]:
    steps: list[str] = []
    for line in reply.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        head, sep, rest = stripped.partition(" ")
        if sep and head.rstrip(".):").isdigit() and head != head.rstrip(".):") and rest.strip():
            steps.append(rest.strip())
    if not steps:
        raise UnparseablePlan("reply contains no numbered steps")
    return steps


def make_plan(gateway: VlmGateway, spec: Specification) -> Plan | None:
    """Ask for a build plan; retry once on an unparseable reply, then go plan-less."""
    messages = [ChatMessage(role="system", text=PLAN_PROMPT), _spec_message(spec)]
    reply = gateway.complete(messages, tag="plan")
    try:
        return Plan(tuple(parse_plan_steps(reply)))
    except UnparseablePlan:
        retry = messages + [
            ChatMessage(role="assistant", text=reply),
            ChatMessage(role="user", text=_REPLAN_REQUEST),
        ]
        second = gateway.complete(retry, tag="plan")
        try:
            return Plan(tuple(parse_plan_steps(second)))
        except UnparseablePlan:
            logger.warning("plan reply unparseable twice; continuing without a plan")
            return None


def derive_hints(
    gateway: VlmGateway,
    code: str,
    feedback: Sequence[FeedbackItem],
    corpus: DocCorpus | None,
    docs_budget: int = DEFAULT_DOCS_BUDGET,
) -> str:
    if not feedback:
        raise ValueError("derive_hints requires non-empty feedback")
    documentation = ""
    if corpus is not None:
        documentation = truncate_for_context(corpus, docs_budget, code)
    filled = REPAIR_HINTS_TEMPLATE.format(
        code=code,
        feedback=format_feedback(feedback),
        documentation=documentation,
    )
    return gateway.complete([ChatMessage(role="system", text=filled)], tag="hints").strip()


def strip_code_fences(reply: str) -> str:
    """Remove a surrounding markdown fence, preserving the interior byte-exact."""
    lines = reply.split("\n")
    opening = None
    for index, line in enumerate(lines):
        if line.lstrip().startswith("```"):
            opening = index
            break
    if opening is None:
        return reply.strip("\n")
    closing = None
    for index in range(opening + 1, len(lines)):
        if lines[index].strip() == "```":
            closing = index
            break
    interior = lines[opening + 1 : closing if closing is not None else len(lines)]
    return "\n".join(interior)


def generate_code(
    gateway: VlmGateway,
    spec: Specification,
    plan: Plan | None,
    hints: str,
    feedback: Sequence[FeedbackItem],
    prior_errors: Sequence[FeedbackItem],
    attempt: int,
) -> CadScript:
    parts = [spec.full_text()]
    if plan is not None:
        parts.append("Plan:\n" + plan.numbered())
    if feedback:
        parts.append("Feedback on the previous model:\n" + format_feedback(feedback))
    if hints:
        parts.append("Suggestions from documentation review:\n" + hints)
    if prior_errors:
        parts.append("The previous attempt failed with these errors:\n" + format_feedback(prior_errors))
    messages = [
        ChatMessage(role="system", text=CODEGEN_PROMPT),
        ChatMessage(role="user", text="\n\n".join(parts), images=list(spec.sketches)),
    ]
    reply = gateway.complete(messages, tag="codegen")
    source = strip_code_fences(reply)
    if not source.strip():
        raise EmptyCompletion(f"attempt {attempt} returned an empty completion")
    return CadScript(source=source, attempt=attempt)


def _dotted_name(node: ast.AST) -> str | None:
    parts: list[str] = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
        return ".".join(reversed(parts))
    return None


def _open_writes_absolute(call: ast.Call) -> bool:
    args = list(call.args)
    if not args or not isinstance(args[0], ast.Constant) or not isinstance(args[0].value, str):
        return False
    if not args[0].value.startswith(("/", "~")):
        return False
    mode = "r"
    if len(args) > 1 and isinstance(args[1], ast.Constant) and isinstance(args[1].value, str):
        mode = args[1].value
    for kw in call.keywords:
        if kw.arg == "mode" and isinstance(kw.value, ast.Constant) and isinstance(kw.value.value, str):
            mode = kw.value.value
    return bool(set(mode) & _WRITE_MODE_CHARS)


def static_check(script: CadScript) -> CheckReport:
    try:
        tree = ast.parse(script.source)
    except SyntaxError as exc:
        return CheckReport(
            syntax_errors=((exc.lineno or 0, exc.msg or "syntax error"),),
            missing_result=False,
            forbidden_calls=(),
        )
    has_result = False
    forbidden: list[str] = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id == "result" and isinstance(node.ctx, ast.Store):
            has_result = True
        if isinstance(node, ast.Call):
            name = _dotted_name(node.func)
            if name is None:
                continue
            if name in FORBIDDEN_BARE_CALLS:
                forbidden.append(name)
            elif any(name == p.rstrip(".") or name.startswith(p) for p in FORBIDDEN_PREFIXES):
                forbidden.append(name)
            elif name == "open" and _open_writes_absolute(node):
                forbidden.append("open")
    return CheckReport(
        syntax_errors=(),
        missing_result=not has_result,
        forbidden_calls=tuple(dict.fromkeys(forbidden)),
    )


def rewrite_export_path(source: str, filename: str, export_template: str) -> str:
    """Point every export call at `filename`; append an export if none exists.

    Scripts run with the run directory as working directory, so a relative
    filename keeps the rewritten source identical across runs.
    """
    tree = ast.parse(source)
    targets: list[ast.Constant] = []
    for node in ast.walk(tree):
        if not isinstance(node, ast.Call):
            continue
        name = _dotted_name(node.func)
        if name is None or not name.split(".")[-1] == "export":
            continue
        arg_index = 1 if name.endswith("exporters.export") else 0
        if len(node.args) > arg_index:
            arg = node.args[arg_index]
            if isinstance(arg, ast.Constant) and isinstance(arg.value, str):
                targets.append(arg)
    if not targets:
        stub = export_template.format(path=filename)
        return source.rstrip("\n") + "\n\n" + stub + "\n"
    lines = source.split("\n")
    literal = json.dumps(filename)
    for node in sorted(targets, key=lambda n: (n.lineno, n.col_offset), reverse=True):
        if node.lineno != node.end_lineno:
            continue  # multi-line string literal as a path is not worth supporting
        row = node.lineno - 1
        line = lines[row]
        lines[row] = line[: node.col_offset] + literal + line[node.end_col_offset :]
    return "\n".join(lines)


def _child_env(run_dir: Path, backend: BackendDescriptor) -> dict[str, str]:
    # Deliberately not a copy of os.environ: generated code must never see
    # provider credentials or other secrets from the parent process.
    env = {
        "PATH": os.environ.get("PATH", "/usr/local/bin:/usr/bin:/bin"),
        "HOME": str(run_dir),
        "LC_ALL": "C.UTF-8",
    }
    env.update(backend.env)
    return env


def execute(
    script: CadScript,
    run_dir: Path,
    approval: ApprovalGate,
    backend: BackendDescriptor,
) -> ModelArtifact:
    """Run an approved script in a child process and collect the exported mesh."""
    if script.check is None or not script.check.ok:
        raise ValueError("only scripts with a passing check report may execute")
    if not approval.request(script):
        raise ApprovalDenied(f"execution of attempt {script.attempt} was denied")
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    rewritten = rewrite_export_path(script.source, MODEL_FILENAME, backend.export_template)
    script_path = run_dir / f"attempt_{script.attempt}.script"
    stderr_path = run_dir / f"attempt_{script.attempt}.stderr"
    script_path.write_text(rewritten, encoding="utf-8")
    try:
        proc = subprocess.run(
            [*backend.interpreter_cmd, str(script_path)],
            cwd=run_dir,
            env=_child_env(run_dir, backend),
            capture_output=True,
            text=True,
            timeout=backend.timeout_s,
        )
    except subprocess.TimeoutExpired:
        stderr_path.write_text(f"wall-clock timeout after {backend.timeout_s}s\n", encoding="utf-8")
        raise ExecutionTimeout(
            f"attempt {script.attempt} exceeded the {backend.timeout_s}s execution timeout"
        ) from None
    stderr_path.write_text(proc.stderr, encoding="utf-8")
    if proc.returncode != 0:
        raise ExecutionFailed(
            f"attempt {script.attempt} exited with code {proc.returncode}",
            stderr=proc.stderr,
        )
    mesh_path = run_dir / MODEL_FILENAME
    if not mesh_path.is_file() or mesh_path.stat().st_size == 0:
        raise OutputMissing(f"attempt {script.attempt} exited cleanly but produced no {MODEL_FILENAME}")
    return ModelArtifact(
        mesh_path=mesh_path,
        script=replace(script, source=rewritten),
        produced_at=time.time(),
        exec_log=proc.stdout + proc.stderr,
    )


class CadAgent:
    """Owns the design loop state for one session.

    Attempt numbers are session-global so run-dir files never collide across
    verification rounds.
    """

    def __init__(
        self,
        gateway: VlmGateway,
        backend: BackendDescriptor,
        corpus: DocCorpus | None = None,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        docs_budget: int = DEFAULT_DOCS_BUDGET,
    ) -> None:
        if max_attempts < 1:
            raise ValueError(f"max_attempts must be >= 1, got {max_attempts}")
        self.gateway = gateway
        self.backend = backend
        self.corpus = corpus
        self.max_attempts = max_attempts
        self.docs_budget = docs_budget
        self.plan: Plan | None = None
        self.last_source = ""
        self._attempts = itertools.count(1)

    def design(
        self,
        spec: Specification,
        feedback: Sequence[FeedbackItem],
        run_dir: Path,
        approval: ApprovalGate,
    ) -> tuple[CadScript, ModelArtifact]:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        if not feedback:
            self.plan = make_plan(self.gateway, spec)
            if self.plan is not None:
                (run_dir / "plan.txt").write_text(self.plan.numbered() + "\n", encoding="utf-8")
        hints = ""
        if feedback:
            hints = derive_hints(
                self.gateway, self.last_source, feedback, self.corpus, self.docs_budget
            )
        prior_errors: list[FeedbackItem] = []
        for round_attempt in range(1, self.max_attempts + 1):
            attempt = next(self._attempts)
            try:
                script = generate_code(
                    self.gateway, spec, self.plan, hints, feedback, prior_errors, attempt
                )
            except EmptyCompletion as exc:
                prior_errors = [
                    FeedbackItem(FeedbackSource.STATIC_CHECK_ERROR, str(exc), round_attempt)
                ]
                continue
            script = replace(script, check=static_check(script))
            assert script.check is not None
            if not script.check.ok:
                findings = script.check.describe()
                (run_dir / f"attempt_{attempt}.script").write_text(script.source, encoding="utf-8")
                (run_dir / f"attempt_{attempt}.stderr").write_text(findings + "\n", encoding="utf-8")
                prior_errors = [
                    FeedbackItem(FeedbackSource.STATIC_CHECK_ERROR, findings, round_attempt)
                ]
                continue
            try:
                artifact = execute(script, run_dir, approval, self.backend)
            except ExecutionFailed as exc:
                prior_errors = [
                    FeedbackItem(
                        FeedbackSource.EXECUTION_ERROR, exc.stderr or str(exc), round_attempt
                    )
                ]
                continue
            except (ExecutionTimeout, OutputMissing) as exc:
                prior_errors = [
                    FeedbackItem(FeedbackSource.EXECUTION_ERROR, str(exc), round_attempt)
                ]
                continue
            self.last_source = artifact.script.source
            return artifact.script, artifact
        raise MaxAttemptsExceeded(
            f"no artifact after {self.max_attempts} attempts; last errors: "
            + (prior_errors[0].text if prior_errors else "none recorded")
        )
