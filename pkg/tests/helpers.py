"""Shared test fixtures: canned replies, geometry oracles, file builders.

The geometry oracles are independent of the package under test: ray-parity
point-in-solid via ray/triangle intersection counting, and silhouette pixel
statistics straight off the rendered arrays.
"""

from __future__ import annotations

import io
import json
import struct
import time
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image, ImageDraw

# --- canned scenario content -------------------------------------------------

BLOCK_SPEC_TEXT = (
    "length=10 width=10 height=2, all in cm. the holes are through-holes with "
    "diameter 2cm. they are positioned in opposite corners of the part, 2cm "
    "away from the closest edge. the material is plastic."
)

# The canonical generated script for the block-with-holes part; fixture
# transcripts must return it byte-exact.
BLOCK_SCRIPT_REPLY = """import cadquery as cq

# Step 1: Create the base block (non-centered)
block = cq.Workplane("XY").box(10, 10, 2, centered=False)
# Step 2: Define the hole positions (relative to the block's bottom-left corner)
hole_positions = [(2, 8), (8, 2)]  # (x, y) coordinates of the hole centers
# Step 3: Create the through-holes on the top face
block = block.faces(">Z").workplane().pushPoints(hole_positions).hole(2)
# Step 4: Finalize the model
result = block

result.export("/data/2025-01-14-15-06-38-block-w-holes/example.stl")"""

SIMPLE_BOX_REPLY = 'import cadquery as cq\n\nresult = cq.Workplane("XY").box(4, 2, 1)'

# Scripted validation feedback for a multi-round session: three corrections,
# then acceptance (the empty string).
TOY_CAR_FEEDBACK = (
    "make the wheels parallel to the XZ plane, not the XY plane!",
    "the wheels are asymmetric - create them by extruding into _both_ directions",
    "make the wheels only half as wide",
)

FIXTURES_DIR = Path(__file__).parent / "fixtures"
BLOCK_FIXTURE = FIXTURES_DIR / "block_with_holes.jsonl"
BLOCK_REPLIES = FIXTURES_DIR / "block_with_holes_replies.json"
BLOCK_ZERO_SHOT_FIXTURE = FIXTURES_DIR / "block_with_holes_zero_shot.jsonl"


def write_replay(path: Path, responses: Sequence[str]) -> Path:
    """Write a minimal replay transcript: one response per line."""
    lines = [json.dumps({"response": response}) for response in responses]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def sketch_png_bytes(size: int = 240) -> bytes:
    """Deterministic hand-drawn-style sketch: block outline plus two holes."""
    image = Image.new("L", (size, size), 255)
    draw = ImageDraw.Draw(image)
    draw.rectangle([30, 30, size - 30, size - 30], outline=0, width=3)
    draw.ellipse([54, 150, 90, 186], outline=0, width=3)
    draw.ellipse([150, 54, 186, 90], outline=0, width=3)
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


# --- geometry oracles ---------------------------------------------------------

# Deliberately irrational-looking direction so rays never graze triangle
# edges of axis-aligned or 64-segment-cylindrical geometry.
RAY_DIRECTION = np.array([0.376412, 0.519443, 0.767294])
RAY_DIRECTION = RAY_DIRECTION / np.linalg.norm(RAY_DIRECTION)


def ray_crossings(point: Sequence[float], triangles: np.ndarray,
                  direction: np.ndarray = RAY_DIRECTION, eps: float = 1e-9) -> int:
    """Number of ray/triangle intersections from `point` along `direction`."""
    tris = np.asarray(triangles, dtype=np.float64)
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    p = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, p)
    valid = np.abs(det) > eps
    inv_det = np.zeros_like(det)
    inv_det[valid] = 1.0 / det[valid]
    s = np.asarray(point, dtype=np.float64) - v0
    u = np.einsum("ij,ij->i", s, p) * inv_det
    q = np.cross(s, e1)
    v = (q @ direction) * inv_det
    t = np.einsum("ij,ij->i", q, e2) * inv_det
    hits = valid & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 1e-7)
    return int(np.count_nonzero(hits))


def inside_solid(point: Sequence[float], triangles: np.ndarray) -> bool:
    """Odd crossing parity means the point is inside the closed surface."""
    return ray_crossings(point, triangles) % 2 == 1


def unit_cube_triangles() -> np.ndarray:
    """The 12 triangles of the axis-aligned unit cube [0, 1]^3."""
    quads = (
        ((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)),
        ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),
        ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)),
        ((0, 1, 0), (1, 1, 0), (1, 1, 1), (0, 1, 1)),
        ((0, 0, 0), (0, 1, 0), (0, 1, 1), (0, 0, 1)),
        ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)),
    )
    triangles = []
    for a, b, c, d in quads:
        triangles.append((a, b, c))
        triangles.append((a, c, d))
    return np.asarray(triangles, dtype=np.float64)


# --- STL byte builders ---------------------------------------------------------


def binary_stl_bytes(triangles: np.ndarray, header: bytes = b"test binary stl") -> bytes:
    tris = np.asarray(triangles, dtype=np.float64)
    out = bytearray(header.ljust(80, b"\x00")[:80])
    out += struct.pack("<I", len(tris))
    for tri in tris:
        normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        length = np.linalg.norm(normal)
        if length:
            normal = normal / length
        out += struct.pack("<3f", *normal)
        for vertex in tri:
            out += struct.pack("<3f", *vertex)
        out += struct.pack("<H", 0)
    return bytes(out)


def ascii_stl_text(triangles: np.ndarray, name: str = "part") -> str:
    lines = [f"solid {name}"]
    for tri in np.asarray(triangles, dtype=np.float64):
        lines.append("  facet normal 0 0 0")
        lines.append("    outer loop")
        for vertex in tri:
            lines.append(f"      vertex {vertex[0]} {vertex[1]} {vertex[2]}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    return "\n".join(lines) + "\n"


# --- misc ----------------------------------------------------------------------


def wait_for(predicate: Callable[[], object], timeout: float = 20.0,
             interval: float = 0.02,
             message: str | Callable[[], str] = "condition") -> object:
    """Poll until `predicate` returns truthy; raises on timeout."""
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(interval)
    detail = message() if callable(message) else message
    raise AssertionError(f"timed out after {timeout}s waiting for {detail}")
