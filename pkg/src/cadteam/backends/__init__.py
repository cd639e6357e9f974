"""Backend descriptors: how to run generated CAD scripts.

The pipeline never imports a CAD kernel itself; it shells out to the
interpreter named by the active descriptor. The builtin descriptor points
the child process at the bundled minicad module (importable as `cadquery`),
so the whole pipeline runs without any external CAD installation. Use
`cadquery_backend()` when the real library is installed.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

CADQUERY_DOCS_URL = "https://cadquery.readthedocs.io/en/latest/classreference.html"


@dataclass
class BackendDescriptor:
    interpreter_cmd: list[str]
    export_template: str = 'result.export("{path}")'
    docs_url: str = ""
    timeout_s: float = 60.0
    env: dict[str, str] = field(default_factory=dict)


def shim_dir() -> Path:
    """Directory that exposes the builtin backend under the name `cadquery`."""
    return Path(__file__).parent / "minicad"


def builtin_backend(timeout_s: float = 60.0) -> BackendDescriptor:
    from ..docs import bundled_snapshot_path

    return BackendDescriptor(
        interpreter_cmd=[sys.executable],
        docs_url=str(bundled_snapshot_path()),
        timeout_s=timeout_s,
        env={"PYTHONPATH": str(shim_dir())},
    )


def cadquery_backend(docs_url: str = CADQUERY_DOCS_URL,
                     timeout_s: float = 60.0) -> BackendDescriptor:
    """Descriptor for an environment with the real CadQuery library installed."""
    return BackendDescriptor(
        interpreter_cmd=[sys.executable],
        docs_url=docs_url,
        timeout_s=timeout_s,
    )
