"""Shared fixtures plus a per-criterion verdict section in the summary."""

from __future__ import annotations

from pathlib import Path

import pytest

from cadteam.backends import BackendDescriptor, builtin_backend
from cadteam.docs import bundled_snapshot_path, retrieve
from cadteam.domain import SketchImage
from cadteam.gateway import ProviderConfig, ReplayProvider, TranscriptRecorder, VlmGateway

import helpers

_VERDICT_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts: dict[int, tuple[str, str]] = {}

    def note(number: int, title: str, verdict: str) -> None:
        current = verdicts.get(number)
        if current is None or _VERDICT_RANK[verdict] > _VERDICT_RANK[current[1]]:
            verdicts[number] = (title, verdict)

    for status, verdict in (("passed", "PASS"), ("skipped", "SKIP"),
                            ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, []):
            crit = getattr(report, "criterion", None)
            if crit is None:
                continue
            if verdict == "PASS" and report.when != "call":
                continue
            note(crit[0], crit[1], verdict)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        title, verdict = verdicts[number]
        terminalreporter.write_line(f"criterion {number:>2}: {title}: {verdict}")


@pytest.fixture(scope="session")
def sketch_bytes() -> bytes:
    return helpers.sketch_png_bytes()


@pytest.fixture()
def sketch(sketch_bytes: bytes) -> SketchImage:
    return SketchImage(data=sketch_bytes, format="png", label="part sketch")


@pytest.fixture(scope="session")
def backend() -> BackendDescriptor:
    return builtin_backend()


@pytest.fixture(scope="session")
def corpus(tmp_path_factory: pytest.TempPathFactory):
    cache = tmp_path_factory.mktemp("docs-cache")
    return retrieve(str(bundled_snapshot_path()), cache)


@pytest.fixture()
def make_gateway(tmp_path: Path):
    """Build a gateway over canned responses, recording to a tmp transcript."""

    counter = iter(range(1, 1000))

    def build(responses, record: bool = True, **config_overrides) -> VlmGateway:
        config = ProviderConfig(**config_overrides)
        recorder = None
        if record:
            transcript = tmp_path / f"transcript_{next(counter)}.jsonl"
            recorder = TranscriptRecorder(transcript)
        return VlmGateway(config, ReplayProvider(list(responses)), recorder)

    return build
