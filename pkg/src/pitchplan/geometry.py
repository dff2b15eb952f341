"""Planar primitives shared by the planner and the tracker.

Points are plain ``(x, y)`` pairs; polygons are convex and counter-clockwise.
Boundary contact never counts as blocking: a visibility segment may run along
an edge or touch a vertex of an obstacle.
"""
from __future__ import annotations

import math
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

#: Default geometric tolerance in meters.
EPS = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate geometric input."""


class Point2(NamedTuple):
    x: float
    y: float

    @classmethod
    def of(cls, p) -> "Point2":
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise GeometryError(f"non-finite point ({x}, {y})")
        return cls(x, y)


class Segment2(NamedTuple):
    a: Point2
    b: Point2

    @classmethod
    def of(cls, a, b) -> "Segment2":
        a, b = Point2.of(a), Point2.of(b)
        if math.hypot(b.x - a.x, b.y - a.y) <= 1e-12:
            raise GeometryError("degenerate segment")
        return cls(a, b)


class Containment(Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


class Polygon2:
    """Convex counter-clockwise polygon.

    Besides the vertex array, the half-plane form ``normals @ p <= offsets``
    (unit outward normals, one row per edge ``v[i] -> v[i+1]``) is cached since
    every visibility test goes through it.
    """

    __slots__ = ("vertices", "normals", "offsets")

    def __init__(self, vertices, eps: float = EPS):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least 3 (x, y) vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("non-finite polygon vertex")
        edges = np.roll(v, -1, axis=0) - v
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross < -eps):
            raise GeometryError("polygon is not convex and counter-clockwise")
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        if np.any(lengths <= eps):
            raise GeometryError("repeated polygon vertex")
        # outward normal of a ccw edge (dx, dy) is (dy, -dx)
        normals = np.column_stack((edges[:, 1], -edges[:, 0])) / lengths[:, None]
        v.setflags(write=False)
        normals.setflags(write=False)
        offsets = np.einsum("ij,ij->i", normals, v)
        offsets.setflags(write=False)
        self.vertices = v
        self.normals = normals
        self.offsets = offsets

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"Polygon2({self.vertices.tolist()!r})"


def segments_properly_intersect(s1, s2, eps: float = EPS) -> bool:
    """True iff the two segments cross at a single point interior to both."""
    (ax, ay), (bx, by) = s1
    (cx, cy), (dx, dy) = s2

    def orient(px, py, qx, qy, rx, ry):
        return (qx - px) * (ry - py) - (qy - py) * (rx - px)

    d1 = orient(ax, ay, bx, by, cx, cy)
    d2 = orient(ax, ay, bx, by, dx, dy)
    d3 = orient(cx, cy, dx, dy, ax, ay)
    d4 = orient(cx, cy, dx, dy, bx, by)
    # scale the tolerance by segment length so it stays in meters
    l1 = math.hypot(bx - ax, by - ay)
    l2 = math.hypot(dx - cx, dy - cy)
    t1 = eps * l1
    t2 = eps * l2
    return (
        ((d1 > t1 and d2 < -t1) or (d1 < -t1 and d2 > t1))
        and ((d3 > t2 and d4 < -t2) or (d3 < -t2 and d4 > t2))
    )


def point_in_polygon(p, poly: Polygon2, eps: float = EPS) -> Containment:
    s = poly.normals @ np.asarray(p, dtype=float) - poly.offsets
    worst = s.max()
    if worst > eps:
        return Containment.OUTSIDE
    if worst >= -eps:
        return Containment.BOUNDARY
    return Containment.INSIDE


def points_strictly_inside(points: np.ndarray, poly: Polygon2, eps: float = EPS) -> np.ndarray:
    """Vectorized ``point_in_polygon(...) is INSIDE`` over an ``(n, 2)`` array."""
    s = points @ poly.normals.T - poly.offsets
    return s.max(axis=1) < -eps


def blocked_mask(a: np.ndarray, b: np.ndarray, normals: np.ndarray, offsets: np.ndarray,
                 eps: float = EPS) -> np.ndarray:
    """Open-interior blockage of many segments by many convex polygons.

    ``a``, ``b`` are ``(P, 2)`` segment endpoints. ``normals`` is ``(M, K, 2)``
    and ``offsets`` ``(M, K)``: M polygons padded to K half-planes each (padding
    rows use a zero normal and offset 1). Returns a ``(P, M)`` boolean array.

    Each segment is clipped against every half-plane (Cyrus-Beck); it is blocked
    when the surviving piece is longer than ``eps``.
    """
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    # (P, M, K)
    num = offsets[None, :, :] - np.einsum("pj,mkj->pmk", a, normals)
    den = np.einsum("pj,mkj->pmk", d, normals)
    # nearly parallel directions would produce garbage clipping parameters
    parallel = np.abs(den) <= 1e-12 * np.maximum(length, 1.0)[:, None, None]
    # a parallel edge line the segment lies on or beyond can never be entered
    outside_parallel = parallel & (num <= eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / np.where(parallel, 1.0, den)
    t_lo = np.where(~parallel & (den < 0), t, -np.inf)
    t_hi = np.where(~parallel & (den > 0), t, np.inf)
    lo = np.maximum(t_lo.max(axis=2), 0.0)
    hi = np.minimum(t_hi.min(axis=2), 1.0)
    inside_len = (hi - lo) * length[:, None]
    return (inside_len > eps) & ~outside_parallel.any(axis=2)


def blocked_by_any(a: np.ndarray, b: np.ndarray, polygons: Sequence[Polygon2], eps: float = EPS) -> np.ndarray:
    """``blocked_mask(...).any(axis=1)`` with a bounding-box prefilter per polygon.

    A segment can only cross an interior whose bounding box its own box overlaps,
    so each polygon clips just the few segments that reach it.
    """
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    out = np.zeros(len(a), bool)
    for poly in polygons:
        pmin = poly.vertices.min(axis=0)
        pmax = poly.vertices.max(axis=0)
        idx = np.flatnonzero(~out & np.all(hi > pmin - eps, axis=1) & np.all(lo < pmax + eps, axis=1))
        if idx.size:
            out[idx] = blocked_mask(a[idx], b[idx], poly.normals[None], poly.offsets[None], eps)[:, 0]
    return out


def segment_blocked_by_polygon(s, poly: Polygon2, eps: float = EPS) -> bool:
    """True iff the segment passes through the open interior of ``poly``."""
    a = np.asarray([s[0]], dtype=float)
    b = np.asarray([s[1]], dtype=float)
    return bool(blocked_mask(a, b, poly.normals[None], poly.offsets[None], eps)[0, 0])


def turn_angle(dir_in, dir_out) -> float:
    """Unsigned angle in ``[0, pi]`` between two nonzero direction vectors."""
    ax, ay = float(dir_in[0]), float(dir_in[1])
    bx, by = float(dir_out[0]), float(dir_out[1])
    if (ax == 0.0 and ay == 0.0) or (bx == 0.0 and by == 0.0):
        raise GeometryError("turn angle of a zero vector")
    return abs(math.atan2(ax * by - ay * bx, ax * bx + ay * by))


def wrap_angle(theta: float) -> float:
    """Map an angle into ``(-pi, pi]``."""
    w = math.remainder(theta, 2.0 * math.pi)
    # remainder rounds half to even, so -pi can come back as -pi
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    w = np.remainder(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w <= -np.pi, w + 2.0 * np.pi, w)


def heading_vector(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def polyline_distance(p, polyline: Sequence) -> float:
    """Distance from ``p`` to a polyline (a single point is allowed)."""
    pts = np.asarray(polyline, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(pts) == 1:
        return float(np.hypot(*(p - pts[0])))
    a, b = pts[:-1], pts[1:]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    proj = a + t[:, None] * d
    return float(np.min(np.hypot(*(p - proj).T)))
