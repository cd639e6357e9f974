"""STL loading and deterministic multi-view rendering.

The renderer is a self-contained software rasterizer: orthographic
projection, z-buffer, flat shading with a single light at the camera.
Identical input produces byte-identical PNG output.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EmptyMesh, MalformedStl

RENDER_SIZE = 512

_MARGIN = 1.1  # bounding-sphere framing margin (10%)
_SHADE_FLOOR = 60.0
_SHADE_SPAN = 190.0  # brightest facet is 250, always below background
_BACKGROUND = 255


@dataclass(eq=False)
class Mesh:
    """Triangle soup in model units with a computed bounding box."""

    triangles: np.ndarray  # shape (n, 3, 3), float64
    bbox_min: np.ndarray = field(init=False)
    bbox_max: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        tris = np.asarray(self.triangles, dtype=np.float64)
        if tris.ndim != 3 or tris.shape[1:] != (3, 3):
            raise MalformedStl(f"expected (n, 3, 3) triangle array, got {tris.shape}")
        if tris.shape[0] == 0:
            raise EmptyMesh("mesh has no triangles")
        if not np.isfinite(tris).all():
            raise MalformedStl("mesh contains non-finite coordinates")
        self.triangles = tris
        verts = tris.reshape(-1, 3)
        self.bbox_min = verts.min(axis=0)
        self.bbox_max = verts.max(axis=0)

    @property
    def extents(self) -> np.ndarray:
        return self.bbox_max - self.bbox_min

    @property
    def is_degenerate(self) -> bool:
        return bool(np.all(self.extents == 0.0))


class ViewLabel(str, Enum):
    TOP = "top"
    BOTTOM = "bottom"
    RIGHT = "right"
    LEFT = "left"
    FRONT = "front"
    BACK = "back"
    ISOMETRIC = "isometric"


VIEW_ORDER: tuple[ViewLabel, ...] = (
    ViewLabel.TOP,
    ViewLabel.BOTTOM,
    ViewLabel.RIGHT,
    ViewLabel.LEFT,
    ViewLabel.FRONT,
    ViewLabel.BACK,
    ViewLabel.ISOMETRIC,
)

_SQRT3 = float(np.sqrt(3.0))
_SQRT6 = float(np.sqrt(6.0))

# label -> (view forward direction, screen-up direction), both unit vectors.
# Z is up; front looks from -Y toward +Y, right from +X toward -X, top from
# +Z downward; the isometric camera sits along +(1, 1, 1).
_CAMERAS: dict[ViewLabel, tuple[tuple[float, float, float], tuple[float, float, float]]] = {
    ViewLabel.TOP: ((0.0, 0.0, -1.0), (0.0, 1.0, 0.0)),
    ViewLabel.BOTTOM: ((0.0, 0.0, 1.0), (0.0, 1.0, 0.0)),
    ViewLabel.RIGHT: ((-1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    ViewLabel.LEFT: ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    ViewLabel.FRONT: ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
    ViewLabel.BACK: ((0.0, -1.0, 0.0), (0.0, 0.0, 1.0)),
    ViewLabel.ISOMETRIC: (
        (-1.0 / _SQRT3, -1.0 / _SQRT3, -1.0 / _SQRT3),
        (-1.0 / _SQRT6, -1.0 / _SQRT6, 2.0 / _SQRT6),
    ),
}


def camera_direction(label: ViewLabel) -> tuple[float, float, float]:
    """Unit vector from the scene toward the camera for a view label."""
    forward, _ = _CAMERAS[label]
    return (-forward[0], -forward[1], -forward[2])


@dataclass(eq=False)
class View:
    label: ViewLabel
    image: np.ndarray  # (size, size) uint8 grayscale
    camera_dir: tuple[float, float, float]
    degenerate: bool = False

    def png_bytes(self) -> bytes:
        return encode_png(self.image)


@dataclass(eq=False)
class ViewSet:
    views: tuple[View, ...]

    def __post_init__(self) -> None:
        labels = [view.label for view in self.views]
        if sorted(labels, key=lambda l: l.value) != sorted(VIEW_ORDER, key=lambda l: l.value):
            raise ValueError(f"view set must contain each of the 7 labels exactly once, got {labels}")

    def by_label(self, label: ViewLabel) -> View:
        for view in self.views:
            if view.label == label:
                return view
        raise KeyError(label.value)

    @property
    def degenerate(self) -> bool:
        return any(view.degenerate for view in self.views)


def load_stl(path: str | Path) -> Mesh:
    """Parse a binary or ASCII STL file into a Mesh."""
    data = Path(path).read_bytes()
    if not data.strip():
        raise MalformedStl(f"{path}: empty file")
    if _looks_ascii(data):
        return Mesh(_parse_ascii(data, str(path)))
    return Mesh(_parse_binary(data, str(path)))


def _looks_ascii(data: bytes) -> bool:
    head = data.lstrip()[:5].lower()
    # Binary headers may also start with "solid"; require facet vertices too.
    return head == b"solid" and b"vertex" in data


def _parse_binary(data: bytes, name: str) -> np.ndarray:
    if len(data) < 84:
        raise MalformedStl(f"{name}: binary STL shorter than its 84-byte preamble")
    (count,) = struct.unpack("<I", data[80:84])
    if count == 0:
        raise EmptyMesh(f"{name}: binary STL declares zero triangles")
    needed = 84 + 50 * count
    if len(data) < needed:
        raise MalformedStl(
            f"{name}: triangle block truncated ({len(data)} bytes, {needed} required)"
        )
    record = np.dtype(
        [("normal", "<f4", (3,)), ("verts", "<f4", (3, 3)), ("attr", "<u2")]
    )
    body = np.frombuffer(data, dtype=record, count=count, offset=84)
    return body["verts"].astype(np.float64)


def _parse_ascii(data: bytes, name: str) -> np.ndarray:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MalformedStl(f"{name}: ASCII STL with non-ASCII bytes") from exc
    coords: list[list[float]] = []
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0].lower() != "vertex":
            continue
        if len(parts) != 4:
            raise MalformedStl(f"{name}: malformed vertex line {line.strip()!r}")
        try:
            coords.append([float(value) for value in parts[1:]])
        except ValueError as exc:
            raise MalformedStl(f"{name}: non-numeric vertex in {line.strip()!r}") from exc
    if not coords:
        raise EmptyMesh(f"{name}: ASCII STL contains no vertices")
    if len(coords) % 3 != 0:
        raise MalformedStl(f"{name}: vertex count {len(coords)} is not a multiple of 3")
    return np.asarray(coords, dtype=np.float64).reshape(-1, 3, 3)


def render_views(mesh: Mesh, size: int = RENDER_SIZE) -> ViewSet:
    """Render the seven canonical views of a mesh.

    Degenerate meshes (zero-extent bounding box) yield placeholder views
    flagged in metadata instead of raising, so review still sees evidence.
    """
    if size < 8:
        raise ValueError(f"render size must be at least 8 pixels, got {size}")
    if mesh.is_degenerate:
        placeholder = _placeholder_image(size)
        views = tuple(
            View(label, placeholder.copy(), camera_direction(label), degenerate=True)
            for label in VIEW_ORDER
        )
        return ViewSet(views)

    center = (mesh.bbox_min + mesh.bbox_max) / 2.0
    radius = float(np.linalg.norm(mesh.bbox_max - mesh.bbox_min)) / 2.0
    half_extent = radius * _MARGIN
    views = []
    for label in VIEW_ORDER:
        forward, up = (np.array(v, dtype=np.float64) for v in _CAMERAS[label])
        image = _render_one(mesh.triangles, center, half_extent, forward, up, size)
        views.append(View(label, image, camera_direction(label)))
    return ViewSet(tuple(views))


def _render_one(
    triangles: np.ndarray,
    center: np.ndarray,
    half_extent: float,
    forward: np.ndarray,
    up: np.ndarray,
    size: int,
) -> np.ndarray:
    right = np.cross(forward, up)
    offset = triangles - center
    scale = (size / 2.0) / half_extent
    px = offset @ right * scale + size / 2.0
    py = size / 2.0 - offset @ up * scale
    depth = -(offset @ forward)  # larger = closer to the camera

    edges1 = triangles[:, 1] - triangles[:, 0]
    edges2 = triangles[:, 2] - triangles[:, 0]
    normals = np.cross(edges1, edges2)
    lengths = np.linalg.norm(normals, axis=1)

    image = np.full((size, size), _BACKGROUND, dtype=np.uint8)
    zbuf = np.full((size, size), -np.inf)
    for i in range(triangles.shape[0]):
        if lengths[i] == 0.0:
            continue
        x0, x1, x2 = px[i]
        y0, y1, y2 = py[i]
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if abs(area2) < 1e-12:
            continue
        ix0 = max(0, int(np.floor(min(x0, x1, x2) - 0.5)))
        ix1 = min(size - 1, int(np.ceil(max(x0, x1, x2) - 0.5)))
        iy0 = max(0, int(np.floor(min(y0, y1, y2) - 0.5)))
        iy1 = min(size - 1, int(np.ceil(max(y0, y1, y2) - 0.5)))
        if ix1 < ix0 or iy1 < iy0:
            continue
        xs = np.arange(ix0, ix1 + 1) + 0.5
        ys = np.arange(iy0, iy1 + 1) + 0.5
        xg, yg = np.meshgrid(xs, ys)
        w0 = (x2 - x1) * (yg - y1) - (y2 - y1) * (xg - x1)
        w1 = (x0 - x2) * (yg - y2) - (y0 - y2) * (xg - x2)
        w2 = (x1 - x0) * (yg - y0) - (y1 - y0) * (xg - x0)
        if area2 > 0:
            inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        else:
            inside = (w0 <= 0) & (w1 <= 0) & (w2 <= 0)
        if not inside.any():
            continue
        l0 = w0 / area2
        l1 = w1 / area2
        l2 = w2 / area2
        d0, d1, d2 = depth[i]
        pixel_depth = l0 * d0 + l1 * d1 + l2 * d2
        intensity = abs(float(normals[i] @ forward)) / lengths[i]
        shade = np.uint8(round(_SHADE_FLOOR + _SHADE_SPAN * intensity))
        zview = zbuf[iy0 : iy1 + 1, ix0 : ix1 + 1]
        iview = image[iy0 : iy1 + 1, ix0 : ix1 + 1]
        win = inside & (pixel_depth > zview)
        zview[win] = pixel_depth[win]
        iview[win] = shade
    return image


def _placeholder_image(size: int) -> np.ndarray:
    image = np.full((size, size), _BACKGROUND, dtype=np.uint8)
    image[:2, :] = 128
    image[-2:, :] = 128
    image[:, :2] = 128
    image[:, -2:] = 128
    xg, yg = np.meshgrid(np.arange(size), np.arange(size))
    cross = (np.abs(xg - yg) <= 2) | (np.abs(xg + yg - (size - 1)) <= 2)
    image[cross] = 64
    return image


def encode_png(image: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(image, mode="L").save(buffer, format="PNG")
    return buffer.getvalue()


def save_views(view_set: ViewSet, directory: str | Path) -> dict[str, Path]:
    """Write each view as views/{label}.png style files under directory."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for view in view_set.views:
        path = target / f"{view.label.value}.png"
        path.write_bytes(view.png_bytes())
        written[view.label.value] = path
    return written


def silhouette_area(image: np.ndarray) -> int:
    """Count non-background pixels; used by tests and run summaries."""
    return int((image < _BACKGROUND).sum())
