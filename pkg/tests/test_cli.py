"""Command line interface: argument handling, exit codes, printed outcomes."""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from cadteam.cli import main

from helpers import (
    BLOCK_FIXTURE,
    BLOCK_REPLIES,
    BLOCK_SPEC_TEXT,
    BLOCK_ZERO_SHOT_FIXTURE,
    write_replay,
)


@pytest.fixture()
def sketch_file(tmp_path: Path, sketch_bytes) -> Path:
    path = tmp_path / "sketch.png"
    path.write_bytes(sketch_bytes)
    return path


def _run_args(tmp_path: Path, sketch_file: Path) -> list[str]:
    return [
        "run",
        "--sketch", str(sketch_file),
        "--text", BLOCK_SPEC_TEXT,
        "--replay", str(BLOCK_FIXTURE),
        "--scripted-replies", str(BLOCK_REPLIES),
        "--run-root", str(tmp_path / "runs"),
    ]


def test_run_team_session_exits_zero(tmp_path: Path, sketch_file: Path, capsys):
    code = main(_run_args(tmp_path, sketch_file))
    captured = capsys.readouterr()
    assert code == 0
    assert "run directory: " in captured.out
    assert "outcome: DONE (verified=True, validation_rounds=1)" in captured.out
    run_dir = Path(captured.out.split("run directory: ", 1)[1].splitlines()[0])
    assert (run_dir / "model.stl").is_file()


def test_run_zero_shot_mode(tmp_path: Path, sketch_file: Path, capsys):
    code = main([
        "run",
        "--sketch", str(sketch_file),
        "--text", BLOCK_SPEC_TEXT,
        "--mode", "zero-shot",
        "--auto-approve",
        "--replay", str(BLOCK_ZERO_SHOT_FIXTURE),
        "--run-root", str(tmp_path / "runs"),
    ])
    assert code == 0
    assert "outcome: DONE" in capsys.readouterr().out


def test_run_failure_exits_two(tmp_path: Path, capsys):
    replay = write_replay(tmp_path / "replay.jsonl", ["<SUMMARY>s</SUMMARY>"])
    code = main([
        "run", "--text", "a block",
        "--replay", str(replay),
        "--scripted-replies", str(BLOCK_REPLIES),
        "--run-root", str(tmp_path / "runs"),
    ])
    captured = capsys.readouterr()
    assert code == 2
    assert "outcome: FAILED (" in captured.err
    assert "replay exhausted" in captured.err


def test_unsupported_sketch_format_exits_three(tmp_path: Path, capsys):
    bad = tmp_path / "sketch.bmp"
    bad.write_bytes(b"not an image")
    code = main(["run", "--sketch", str(bad), "--text", "a block"])
    captured = capsys.readouterr()
    assert code == 3
    assert "configuration error:" in captured.err
    assert "unsupported sketch format" in captured.err


def test_missing_config_file_exits_three(tmp_path: Path, capsys):
    code = main(["run", "--text", "a block", "--config", str(tmp_path / "absent.json")])
    assert code == 3
    assert "configuration error:" in capsys.readouterr().err


def test_empty_specification_exits_three(tmp_path: Path, capsys):
    code = main(["run", "--replay", str(BLOCK_FIXTURE), "--run-root", str(tmp_path / "runs")])
    assert code == 3
    assert "configuration error:" in capsys.readouterr().err


def test_compare_prints_merged_report(tmp_path: Path, sketch_file: Path, capsys):
    def _printed_run_dir(out: str) -> Path:
        return Path(out.split("run directory: ", 1)[1].splitlines()[0])

    assert main(_run_args(tmp_path, sketch_file)) == 0
    team_dir = _printed_run_dir(capsys.readouterr().out)
    assert main([
        "run",
        "--sketch", str(sketch_file),
        "--text", BLOCK_SPEC_TEXT,
        "--mode", "zero-shot",
        "--auto-approve",
        "--replay", str(BLOCK_ZERO_SHOT_FIXTURE),
        "--run-root", str(tmp_path / "runs"),
    ]) == 0
    zero_dir = _printed_run_dir(capsys.readouterr().out)

    assert main(["compare", str(team_dir), str(zero_dir)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == "cadteam.compare/1"
    assert report["phases"]["1_clarification"] == {"team": "executed", "zero_shot": "skipped"}


def test_compare_missing_run_dir_exits_three(tmp_path: Path, capsys):
    code = main(["compare", str(tmp_path / "a"), str(tmp_path / "b")])
    assert code == 3
    assert "configuration error:" in capsys.readouterr().err


def test_module_entry_point_runs_in_subprocess(tmp_path: Path, sketch_file: Path):
    proc = subprocess.run(
        [sys.executable, "-m", "cadteam.cli", *_run_args(tmp_path, sketch_file)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert "outcome: DONE" in proc.stdout
