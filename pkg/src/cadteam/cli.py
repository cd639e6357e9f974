"""Command line interface: run a session, serve the HTTP API, compare runs.

Exit codes: 0 session DONE, 2 session FAILED, 3 configuration or usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .domain import SketchImage
from .errors import ConfigError, EmptySpecification
from .orchestrator import (
    Mode,
    RunConfig,
    ScriptedUserIO,
    TerminalUserIO,
    compare_runs,
    default_config,
    load_config,
    read_scripted_replies,
    run_session,
    run_zero_shot,
)

_SKETCH_FORMATS = {".png": "png", ".jpg": "jpeg", ".jpeg": "jpeg"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cadteam", description="Sketch/text to parametric CAD pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one design session")
    run.add_argument("--sketch", action="append", default=[], metavar="PATH", help="sketch image (repeatable)")
    run.add_argument("--text", default="", help="textual part description")
    run.add_argument("--config", metavar="PATH", help="JSON run configuration")
    run.add_argument("--mode", choices=["team", "zero-shot"], help="pipeline mode override")
    run.add_argument("--auto-approve", action="store_true", help="skip execution confirmations")
    run.add_argument("--scripted-replies", metavar="PATH", help="canned user replies (JSON array or lines)")
    run.add_argument("--replay", metavar="PATH", help="replay provider transcript")
    run.add_argument("--run-root", metavar="PATH", help="where run directories are created")

    serve = sub.add_parser("serve", help="serve the HTTP session API")
    serve.add_argument("--config", metavar="PATH", help="JSON run configuration")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--run-root", metavar="PATH", help="where run directories are created")

    compare = sub.add_parser("compare", help="merge two run phase reports into an ablation report")
    compare.add_argument("team_dir", metavar="TEAM_RUN_DIR")
    compare.add_argument("zero_dir", metavar="ZERO_SHOT_RUN_DIR")
    return parser


def _load_sketches(paths: list[str]) -> list[SketchImage]:
    sketches = []
    for raw in paths:
        path = Path(raw)
        fmt = _SKETCH_FORMATS.get(path.suffix.lower())
        if fmt is None:
            raise ConfigError(f"unsupported sketch format {path.suffix!r} for {path} (png/jpeg only)")
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read sketch {path}: {exc}") from exc
        sketches.append(SketchImage(data=data, format=fmt, label=path.name))
    return sketches


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config else default_config()
    overrides = {}
    if getattr(args, "run_root", None):
        overrides["run_root"] = Path(args.run_root)
    if getattr(args, "mode", None):
        overrides["mode"] = Mode(args.mode.replace("-", "_"))
    if getattr(args, "auto_approve", False):
        overrides["auto_approve"] = True
    if overrides:
        config = dataclasses.replace(config, **overrides)
    if getattr(args, "replay", None):
        config = dataclasses.replace(
            config,
            provider=dataclasses.replace(
                config.provider, provider="replay", replay_path=str(args.replay)
            ),
        )
    return config


def _cmd_run(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    sketches = _load_sketches(args.sketch)
    if args.scripted_replies:
        user_io = ScriptedUserIO(read_scripted_replies(args.scripted_replies))
    else:
        user_io = TerminalUserIO()
    try:
        if config.mode is Mode.ZERO_SHOT:
            result = run_zero_shot(sketches, args.text, config, user_io)
        else:
            result = run_session(sketches, args.text, config, user_io)
    except EmptySpecification as exc:
        raise ConfigError(str(exc)) from exc
    print(f"run directory: {result.run_dir}")
    if result.done:
        print(f"outcome: DONE (verified={result.verified}, validation_rounds={result.validation_rounds})")
        return 0
    print(f"outcome: FAILED ({result.error})", file=sys.stderr)
    return 2


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _resolve_config(args)
    uvicorn.run(create_app(config), host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    report = compare_runs(args.team_dir, args.zero_dir)
    print(json.dumps(report, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "serve":
            return _cmd_serve(args)
        return _cmd_compare(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
