"""Minimal script-level CAD backend with a CadQuery-compatible surface.

Generated scripts do `import cadquery as cq`; putting this module's
directory on PYTHONPATH satisfies that import without the real library.
Supported subset: XY workplane, box primitives, top/bottom face selection,
point-driven vertical through-holes, and binary STL export. Anything else
raises with a clear message, which the design loop treats as execution
feedback.

Pure stdlib on purpose: the executing child process stays fast to start and
has no dependencies to inherit.
"""

import math
import struct

_SEGMENTS = 64          # circle tessellation
_RING_FACTOR = 1.25     # square ring half-size around each hole, times radius


class GeometryError(ValueError):
    """Unsupported operation or invalid geometry for this backend."""


class _Solid:
    """Axis-aligned box with optional vertical through-holes."""

    def __init__(self, xmin, ymin, zmin, xmax, ymax, zmax):
        self.bounds = (xmin, ymin, zmin, xmax, ymax, zmax)
        self.holes = []  # (cx, cy, radius)

    def add_hole(self, cx, cy, radius):
        xmin, ymin, _, xmax, ymax, _ = self.bounds
        a = radius * _RING_FACTOR
        if not (xmin < cx - a and cx + a < xmax and ymin < cy - a and cy + a < ymax):
            raise GeometryError(
                f"hole at ({cx}, {cy}) r={radius} is too close to the block edge "
                "for this backend"
            )
        for ox, oy, orad in self.holes:
            b = orad * _RING_FACTOR
            if abs(cx - ox) < a + b and abs(cy - oy) < a + b:
                raise GeometryError(
                    f"holes at ({ox}, {oy}) and ({cx}, {cy}) are too close together "
                    "for this backend"
                )
        self.holes.append((cx, cy, radius))

    def triangles(self):
        xmin, ymin, zmin, xmax, ymax, zmax = self.bounds
        tris = []
        top = _plate_triangles(xmin, ymin, xmax, ymax, self.holes)
        tris += [((ax, ay, zmax), (bx, by, zmax), (cx, cy, zmax))
                 for (ax, ay), (bx, by), (cx, cy) in top]
        tris += [((ax, ay, zmin), (cx, cy, zmin), (bx, by, zmin))
                 for (ax, ay), (bx, by), (cx, cy) in top]
        # four side walls
        tris += _quad((xmin, ymin, zmin), (xmax, ymin, zmin),
                      (xmax, ymin, zmax), (xmin, ymin, zmax), (0, -1, 0))
        tris += _quad((xmax, ymax, zmin), (xmin, ymax, zmin),
                      (xmin, ymax, zmax), (xmax, ymax, zmax), (0, 1, 0))
        tris += _quad((xmin, ymax, zmin), (xmin, ymin, zmin),
                      (xmin, ymin, zmax), (xmin, ymax, zmax), (-1, 0, 0))
        tris += _quad((xmax, ymin, zmin), (xmax, ymax, zmin),
                      (xmax, ymax, zmax), (xmax, ymin, zmax), (1, 0, 0))
        for hx, hy, radius in self.holes:
            ring = _circle_points(hx, hy, radius)
            for i in range(_SEGMENTS):
                j = (i + 1) % _SEGMENTS
                (ax, ay), (bx, by) = ring[i], ring[j]
                mid = ((ax + bx) / 2 - hx, (ay + by) / 2 - hy, 0.0)
                tris += _quad((ax, ay, zmin), (bx, by, zmin),
                              (bx, by, zmax), (ax, ay, zmax),
                              (-mid[0], -mid[1], 0.0))
        return tris


def _circle_points(cx, cy, radius, n=_SEGMENTS):
    return [(cx + radius * math.cos(2 * math.pi * i / n),
             cy + radius * math.sin(2 * math.pi * i / n)) for i in range(n)]


def _square_points(cx, cy, half, n=_SEGMENTS):
    # radial projection of the circle directions onto the square boundary
    pts = []
    for i in range(n):
        t = 2 * math.pi * i / n
        dx, dy = math.cos(t), math.sin(t)
        m = max(abs(dx), abs(dy))
        pts.append((cx + half * dx / m, cy + half * dy / m))
    return pts


def _plate_triangles(x0, y0, x1, y1, holes):
    """CCW 2D triangulation of the rectangle minus circular holes.

    Each hole gets a square ring triangulated against the circle; the
    remaining rectilinear region is cut into vertical slabs.
    """
    if not holes:
        return [((x0, y0), (x1, y0), (x1, y1)), ((x0, y0), (x1, y1), (x0, y1))]
    tris = []
    squares = []
    for cx, cy, radius in holes:
        a = radius * _RING_FACTOR
        squares.append((cx - a, cy - a, cx + a, cy + a))
        circle = _circle_points(cx, cy, radius)
        square = _square_points(cx, cy, a)
        for i in range(_SEGMENTS):
            j = (i + 1) % _SEGMENTS
            tris.append((circle[i], square[i], square[j]))
            tris.append((circle[i], square[j], circle[j]))
    xs = sorted({x0, x1, *(s[0] for s in squares), *(s[2] for s in squares)})
    for xa, xb in zip(xs, xs[1:]):
        if xb - xa <= 1e-12:
            continue
        cuts = sorted((s[1], s[3]) for s in squares
                      if s[0] <= xa + 1e-12 and s[2] >= xb - 1e-12)
        y = y0
        for cy0, cy1 in cuts:
            if cy0 > y + 1e-12:
                tris += _rect_triangles(xa, y, xb, cy0)
            y = max(y, cy1)
        if y < y1 - 1e-12:
            tris += _rect_triangles(xa, y, xb, y1)
    return tris


def _rect_triangles(x0, y0, x1, y1):
    return [((x0, y0), (x1, y0), (x1, y1)), ((x0, y0), (x1, y1), (x0, y1))]


def _quad(p0, p1, p2, p3, outward):
    tris = [(p0, p1, p2), (p0, p2, p3)]
    normal = _normal(*tris[0])
    if sum(n * o for n, o in zip(normal, outward)) < 0:
        tris = [(p0, p2, p1), (p0, p3, p2)]
    return tris


def _normal(p0, p1, p2):
    ux, uy, uz = (p1[i] - p0[i] for i in range(3))
    vx, vy, vz = (p2[i] - p0[i] for i in range(3))
    nx, ny, nz = uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx
    length = math.sqrt(nx * nx + ny * ny + nz * nz)
    if length == 0:
        return (0.0, 0.0, 0.0)
    return (nx / length, ny / length, nz / length)


def _write_stl(path, triangles):
    if not str(path).lower().endswith(".stl"):
        raise GeometryError(f"only STL export is supported, got: {path}")
    header = b"minicad binary stl" + b"\x00" * 62
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<I", len(triangles)))
        for tri in triangles:
            fh.write(struct.pack("<3f", *_normal(*tri)))
            for vertex in tri:
                fh.write(struct.pack("<3f", *vertex))
            fh.write(struct.pack("<H", 0))


class Workplane:
    """Chainable modelling context, mirroring the CadQuery call style.

    Hole coordinates are interpreted in the global XY frame (the workplane
    origin is the projection of the original origin onto the selected face).
    """

    def __init__(self, inPlane="XY", _solid=None, _face=None, _points=None):
        if inPlane != "XY":
            raise GeometryError(
                f"workplane {inPlane!r} is not supported by this backend; use 'XY'"
            )
        self.plane = inPlane
        self._solid = _solid
        self._face = _face
        self._points = _points or []

    def _chain(self, **updates):
        clone = Workplane(self.plane, _solid=self._solid, _face=self._face,
                          _points=list(self._points))
        for key, value in updates.items():
            setattr(clone, key, value)
        return clone

    def box(self, length, width, height, centered=True):
        if min(length, width, height) <= 0:
            raise GeometryError("box dimensions must be positive")
        flags = (centered, centered, centered) if isinstance(centered, bool) else tuple(centered)
        spans = []
        for size, flag in zip((length, width, height), flags):
            spans.append((-size / 2, size / 2) if flag else (0.0, size))
        (x0, x1), (y0, y1), (z0, z1) = spans
        return self._chain(_solid=_Solid(x0, y0, z0, x1, y1, z1))

    def faces(self, selector=None):
        if self._solid is None:
            raise GeometryError("faces() requires a solid; call box() first")
        if selector not in (">Z", "<Z"):
            raise GeometryError(
                f"face selector {selector!r} is not supported by this backend"
            )
        return self._chain(_face=selector)

    def workplane(self, **kwargs):
        if self._face is None:
            raise GeometryError("workplane() requires a selected face")
        return self._chain()

    def pushPoints(self, pntList):
        points = [(float(x), float(y)) for x, y in pntList]
        return self._chain(_points=points)

    def hole(self, diameter, depth=None):
        if self._solid is None or self._face is None:
            raise GeometryError("hole() requires faces(...).workplane() on a solid")
        if diameter <= 0:
            raise GeometryError("hole diameter must be positive")
        zmin, zmax = self._solid.bounds[2], self._solid.bounds[5]
        if depth is not None and depth < (zmax - zmin):
            raise GeometryError("only through-holes are supported by this backend")
        result = self._chain()
        for cx, cy in (result._points or [(0.0, 0.0)]):
            result._solid.add_hole(cx, cy, diameter / 2.0)
        return result._chain(_points=[])

    def export(self, path, *args, **kwargs):
        if self._solid is None:
            raise GeometryError("nothing to export; no solid was created")
        _write_stl(path, self._solid.triangles())
        return self

    def val(self):
        return self._solid

    def __getattr__(self, name):
        raise AttributeError(
            f"operation '{name}' is not supported by this backend"
        )


class exporters:
    @staticmethod
    def export(shape, path, *args, **kwargs):
        shape.export(path)
