"""Disk obstacles, their polygon proxies, and active-region preprocessing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .geometry import EPS, GeometryError, Point2, Polygon2, blocked_mask, segments_properly_intersect

DEFAULT_N_SIDES = 18


@dataclass(frozen=True)
class Obstacle:
    center: Point2
    radius: float
    id: Hashable = None

    def __post_init__(self):
        object.__setattr__(self, "center", Point2.of(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise GeometryError(f"obstacle radius must be positive, got {self.radius}")

    def inflated(self, margin: float) -> "Obstacle":
        return Obstacle(self.center, self.radius + margin, self.id)


@dataclass(frozen=True, eq=False)
class ObstaclePolygon:
    source: Obstacle
    n_sides: int
    phase: float
    polygon: Polygon2

    @property
    def vertices(self) -> np.ndarray:
        return self.polygon.vertices


def polygonize(obs: Obstacle, n_sides: int = DEFAULT_N_SIDES, phase: float = 0.0) -> ObstaclePolygon:
    """Regular ``n_sides``-gon circumscribing the obstacle disk.

    The circumradius is ``R / cos(pi / n)`` so every edge is tangent to the disk;
    the first vertex sits at angle ``phase`` from the center.
    """
    if int(n_sides) != n_sides or n_sides < 3:
        raise GeometryError(f"n_sides must be an integer >= 3, got {n_sides}")
    n_sides = int(n_sides)
    rv = obs.radius / math.cos(math.pi / n_sides)
    ang = phase + 2.0 * math.pi * np.arange(n_sides) / n_sides
    verts = np.column_stack((obs.center.x + rv * np.cos(ang), obs.center.y + rv * np.sin(ang)))
    return ObstaclePolygon(obs, n_sides, float(phase), Polygon2(verts))


@dataclass(frozen=True)
class ActiveRegion:
    """Rectangle aligned with the S-G line.

    Coordinates are ``s`` along the unit S-G direction and ``w`` along its left
    normal, both measured from the start point. ``s_lo <= 0`` and
    ``s_hi >= |SG|`` always hold.
    """

    origin: Point2
    axis: tuple[float, float]
    s_lo: float
    s_hi: float
    w_lo: float
    w_hi: float

    def to_frame(self, pts: np.ndarray) -> np.ndarray:
        ux, uy = self.axis
        d = np.asarray(pts, dtype=float) - np.asarray(self.origin)
        return np.column_stack((d @ np.array([ux, uy]), d @ np.array([-uy, ux])))

    def corners(self) -> np.ndarray:
        ux, uy = self.axis
        o = np.asarray(self.origin)
        u = np.array([ux, uy])
        n = np.array([-uy, ux])
        return np.array([o + s * u + w * n for s, w in (
            (self.s_lo, self.w_lo), (self.s_hi, self.w_lo),
            (self.s_hi, self.w_hi), (self.s_lo, self.w_hi))])


def _region_for(S, G, polys: Sequence[ObstaclePolygon], margin: float) -> ActiveRegion:
    S = np.asarray(S, dtype=float)
    G = np.asarray(G, dtype=float)
    d = G - S
    L = math.hypot(*d)
    u = d / L
    region = ActiveRegion(Point2.of(S), (float(u[0]), float(u[1])), 0.0, L, 0.0, 0.0)
    if not polys:
        return ActiveRegion(region.origin, region.axis, -margin, L + margin, -margin, margin)
    sw = region.to_frame(np.vstack([p.vertices for p in polys]))
    return ActiveRegion(
        region.origin, region.axis,
        min(0.0, sw[:, 0].min()) - margin, max(L, sw[:, 0].max()) + margin,
        min(0.0, sw[:, 1].min()) - margin, max(0.0, sw[:, 1].max()) + margin,
    )


def region_contains_or_intersects(region: ActiveRegion, poly: ObstaclePolygon, eps: float = EPS) -> bool:
    """True iff a polygon vertex lies in the (closed) region or an edge crosses a region edge."""
    sw = region.to_frame(poly.vertices)
    inside = ((sw[:, 0] >= region.s_lo - eps) & (sw[:, 0] <= region.s_hi + eps)
              & (sw[:, 1] >= region.w_lo - eps) & (sw[:, 1] <= region.w_hi + eps))
    if inside.any():
        return True
    rc = region.corners()
    pv = poly.vertices
    for i in range(4):
        r_edge = (rc[i], rc[(i + 1) % 4])
        for j in range(len(pv)):
            if segments_properly_intersect(r_edge, (pv[j], pv[(j + 1) % len(pv)]), eps):
                return True
    return False


def active_set(obstacles: Sequence[ObstaclePolygon], S, G, margin: float = 0.0,
               eps: float = EPS) -> tuple[list[ObstaclePolygon], ActiveRegion]:
    """Grow the active obstacle set to a fixed point.

    Seeds with the polygons whose interior the S-G segment crosses, then keeps
    adding any polygon touching the covering rectangle until nothing changes.
    The returned list preserves input order.
    """
    S = np.asarray(S, dtype=float)
    G = np.asarray(G, dtype=float)
    if math.hypot(*(G - S)) <= eps:
        raise GeometryError("start and goal coincide")
    obstacles = list(obstacles)
    active = [False] * len(obstacles)
    if obstacles:
        normals, offsets = stack_halfplanes([o.polygon for o in obstacles])
        seed = blocked_mask(S[None], G[None], normals, offsets, eps)[0]
        active = [bool(x) for x in seed]
    while True:
        region = _region_for(S, G, [o for o, a in zip(obstacles, active) if a], margin)
        grew = False
        for i, o in enumerate(obstacles):
            if not active[i] and region_contains_or_intersects(region, o, eps):
                active[i] = True
                grew = True
        if not grew:
            return [o for o, a in zip(obstacles, active) if a], region


def stack_halfplanes(polys: Sequence[Polygon2]) -> tuple[np.ndarray, np.ndarray]:
    """Pad the half-plane forms of several polygons into ``(M, K, 2)``/``(M, K)`` arrays."""
    k = max(len(p) for p in polys)
    normals = np.zeros((len(polys), k, 2))
    offsets = np.ones((len(polys), k))
    for i, p in enumerate(polys):
        normals[i, :len(p)] = p.normals
        offsets[i, :len(p)] = p.offsets
    return normals, offsets
