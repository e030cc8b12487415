"""Unit equilateral triangle and unit square, with perimeter arc-length coordinates.

Canonical placement:

* triangle: B=(0,0), C=(1,0), A=(1/2, sqrt(3)/2), centroid O=(1/2, sqrt(3)/6)
* square:   D=(0,0), C=(1,0), B=(1,1), A=(0,1), centroid O=(1/2, 1/2)

Arc length ``s`` runs counterclockwise from the first vertex (B for the
triangle, D for the square), so the first side is always the bottom one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

GEOM_TOL = 1e-9

SQRT3 = math.sqrt(3.0)
SQRT2 = math.sqrt(2.0)


class Point(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Point(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Point(self.x - other[0], self.y - other[1])

    def scale(self, f: float) -> "Point":
        return Point(self.x * f, self.y * f)


class GeometryError(ValueError):
    pass


def dist(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def lerp(p, q, lam: float) -> Point:
    return Point(p[0] + (q[0] - p[0]) * lam, p[1] + (q[1] - p[1]) * lam)


def toward(p, q, length: float) -> Point:
    """Point at distance ``length`` from ``p`` in the direction of ``q``."""
    d = dist(p, q)
    if d == 0.0:
        raise GeometryError("direction undefined for coincident points")
    return lerp(p, q, length / d)


@dataclass(frozen=True)
class Shape:
    kind: str
    labels: tuple[str, ...]
    vertices: tuple[Point, ...]
    centroid: Point
    constants: dict = field(default_factory=dict, compare=False)

    @property
    def perimeter(self) -> float:
        return float(len(self.vertices))

    @property
    def n_sides(self) -> int:
        return len(self.vertices)

    @property
    def max_centroid_dist(self) -> float:
        """Distance from the centroid to a vertex (the farthest boundary point)."""
        return dist(self.centroid, self.vertices[0])

    def vertex(self, label: str) -> Point:
        return self.vertices[self.labels.index(label)]

    def vertex_arc(self, label: str) -> float:
        return float(self.labels.index(label))

    def side(self, i: int) -> tuple[Point, Point]:
        n = self.n_sides
        return self.vertices[i % n], self.vertices[(i + 1) % n]

    def mirror(self, p) -> Point:
        """Reflect across the vertical symmetry axis x = 1/2."""
        return Point(1.0 - p[0], p[1])

    def mirror_arc(self, s: float) -> float:
        # the axis x = 1/2 passes through s = 1/2 (bottom-side midpoint)
        return (1.0 - s) % self.perimeter

    # -- perimeter parameterization -------------------------------------

    def wrap(self, s: float) -> float:
        return s % self.perimeter

    def boundary_point(self, s: float) -> Point:
        s = self.wrap(s)
        i = min(int(s), self.n_sides - 1)
        a, b = self.side(i)
        return lerp(a, b, s - i)

    def boundary_points(self, s) -> np.ndarray:
        """Vectorized boundary_point; returns an (N, 2) array."""
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        i = np.minimum(np.floor(s).astype(int), self.n_sides - 1)
        verts = np.asarray(self.vertices)
        a = verts[i]
        b = verts[(i + 1) % self.n_sides]
        lam = (s - i)[:, None]
        return a + (b - a) * lam

    def side_of(self, p, tol: float = GEOM_TOL) -> list[int]:
        """Indices of the sides that contain ``p`` (two at a vertex)."""
        out = []
        for i in range(self.n_sides):
            a, b = self.side(i)
            if _seg_dist(p, a, b) <= tol:
                out.append(i)
        return out

    def on_boundary(self, p, tol: float = GEOM_TOL) -> bool:
        return bool(self.side_of(p, tol))

    def arc_on_side(self, p, i: int) -> float:
        """Arc coordinate of ``p`` measured along side ``i`` (not wrapped)."""
        a, b = self.side(i)
        lam = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]))
        return i + min(max(lam, 0.0), 1.0)

    def arc_of(self, p, tol: float = GEOM_TOL) -> float:
        sides = self.side_of(p, tol)
        if not sides:
            raise GeometryError(f"point {tuple(p)} is not on the {self.kind} boundary")
        return self.wrap(self.arc_on_side(p, sides[0]))

    def arc_dist(self, s0: float, s1: float) -> float:
        """Counterclockwise arc length from s0 to s1."""
        return (s1 - s0) % self.perimeter


def _seg_dist(p, a, b) -> float:
    ax, ay = b[0] - a[0], b[1] - a[1]
    L2 = ax * ax + ay * ay
    lam = ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / L2
    lam = min(max(lam, 0.0), 1.0)
    return math.hypot(p[0] - a[0] - lam * ax, p[1] - a[1] - lam * ay)


def make_shape(kind: str) -> Shape:
    kind = kind.lower()
    if kind == "triangle":
        h = SQRT3 / 2.0
        verts = (Point(0.0, 0.0), Point(1.0, 0.0), Point(0.5, h))
        return Shape(
            kind="triangle",
            labels=("B", "C", "A"),
            vertices=verts,
            centroid=Point(0.5, h / 3.0),
            constants={"h": h, "x_c": SQRT3 / 3.0, "y_c": SQRT3 / 6.0},
        )
    if kind == "square":
        verts = (Point(0.0, 0.0), Point(1.0, 0.0), Point(1.0, 1.0), Point(0.0, 1.0))
        return Shape(
            kind="square",
            labels=("D", "C", "B", "A"),
            vertices=verts,
            centroid=Point(0.5, 0.5),
            constants={"half_diag": SQRT2 / 2.0},
        )
    raise GeometryError(f"unknown shape kind {kind!r}; expected 'triangle' or 'square'")
