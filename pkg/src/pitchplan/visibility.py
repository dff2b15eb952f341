"""Plain visibility graph over start, goal and uncovered obstacle vertices."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import EPS, Point2, blocked_by_any, points_strictly_inside
from .obstacles import ObstaclePolygon

START = 0
GOAL = 1


class UnplannableError(RuntimeError):
    """No collision-free route exists between start and goal."""


@dataclass(frozen=True)
class NodeOrigin:
    kind: str  # "start" | "goal" | "vertex"
    obstacle: int = -1  # index into the active polygon list
    vertex: int = -1


@dataclass
class VisibilityGraph:
    points: np.ndarray  # (n, 2); node id == row index, start is 0, goal is 1
    origins: list[NodeOrigin]
    adjacency: list[dict[int, float]] = field(repr=False)
    start_exit: int | None = None  # node the covered start escapes through
    goal_entry: int | None = None  # node the covered goal is entered from

    @property
    def nodes(self) -> list[tuple[int, Point2, NodeOrigin]]:
        return [(i, Point2(*self.points[i]), o) for i, o in enumerate(self.origins)]

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(i, j, w) for i, nbrs in enumerate(self.adjacency) for j, w in nbrs.items() if i < j]

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self, nodes_path, edges_path) -> None:
        with open(nodes_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y"])
            for i, (x, y) in enumerate(self.points):
                w.writerow([i, repr(float(x)), repr(float(y))])
        with open(edges_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "w"])
            for i, j, wt in self.edges:
                w.writerow([i, j, repr(wt)])


def exit_vertex(p, direction, poly: ObstaclePolygon, mode: str = "start",
                covered: np.ndarray | None = None, eps: float = EPS) -> int:
    """Index of the polygon vertex used to leave (start) or reach (goal) ``p``.

    In start mode ``direction`` is the robot heading and candidates must lie
    ahead of ``p``; in goal mode it is the arrival direction and candidates must
    lie behind ``p``, i.e. on the side the robot comes from. Among candidates the
    closest wins, ties going to the lower vertex index. If no uncovered vertex
    passes the half-plane test the closest uncovered vertex is used.
    """
    if mode not in ("start", "goal"):
        raise ValueError(f"mode must be 'start' or 'goal', got {mode!r}")
    p = np.asarray(p, dtype=float)
    d = np.asarray(direction, dtype=float)
    verts = poly.vertices
    ok = np.ones(len(verts), bool) if covered is None else ~np.asarray(covered, bool)
    if not ok.any():
        raise UnplannableError("every vertex of the covering obstacle is covered")
    rel = verts - p
    side = rel @ d
    if mode == "goal":
        side = -side
    dist = np.hypot(rel[:, 0], rel[:, 1])
    cand = ok & (side > eps)
    if not cand.any():
        cand = ok
    idx = np.flatnonzero(cand)
    best = dist[idx].min()
    return int(idx[np.flatnonzero(dist[idx] <= best + eps)[0]])


def build_visibility_graph(S, G, actives: Sequence[ObstaclePolygon], start_heading: float | None = None,
                           goal_direction=None, eps: float = EPS) -> VisibilityGraph:
    """Visibility graph over S, G and every active vertex not strictly inside another polygon.

    A start (goal) point strictly inside a polygon is linked only to its exit
    vertex; that link ignores other obstacles. ``start_heading`` defaults to the
    S->G direction, as does ``goal_direction``.
    """
    S = np.asarray(S, dtype=float)
    G = np.asarray(G, dtype=float)
    sg = G - S
    sg_len = math.hypot(*sg)
    sg_dir = sg / sg_len if sg_len > 0 else np.array([1.0, 0.0])
    heading = sg_dir if start_heading is None else np.array([math.cos(start_heading), math.sin(start_heading)])
    arrive = sg_dir if goal_direction is None else np.asarray(goal_direction, dtype=float)

    pts = [S, G]
    origins = [NodeOrigin("start"), NodeOrigin("goal")]
    covered_by_poly = []
    for m, op in enumerate(actives):
        verts = op.vertices
        cov = np.zeros(len(verts), bool)
        for k, other in enumerate(actives):
            if k != m:
                cov |= points_strictly_inside(verts, other.polygon, eps)
        covered_by_poly.append(cov)
        for v in np.flatnonzero(~cov):
            pts.append(verts[v])
            origins.append(NodeOrigin("vertex", m, int(v)))
    points = np.array(pts, dtype=float).reshape(-1, 2)
    n = len(points)
    node_of = {(o.obstacle, o.vertex): i for i, o in enumerate(origins) if o.kind == "vertex"}

    def covering(p):
        return [m for m, op in enumerate(actives) if points_strictly_inside(p[None], op.polygon, eps)[0]]

    s_cover = covering(S)
    g_cover = covering(G)

    ii, jj = np.triu_indices(n, k=1)
    visible = np.ones(len(ii), bool)
    if actives and len(ii):
        visible = ~blocked_by_any(points[ii], points[jj], [op.polygon for op in actives], eps)
    # covered endpoints only connect through their exit links
    if s_cover:
        visible &= (ii != START) & (jj != START)
    if g_cover:
        visible &= (ii != GOAL) & (jj != GOAL)

    d = points[jj] - points[ii]
    w = np.hypot(d[:, 0], d[:, 1])
    # coincident nodes (e.g. the robot standing on a vertex) carry no direction
    visible &= w > eps
    adjacency: list[dict[int, float]] = [{} for _ in range(n)]
    for a, b, wt in zip(ii[visible].tolist(), jj[visible].tolist(), w[visible].tolist()):
        adjacency[a][b] = wt
        adjacency[b][a] = wt

    def link(endpoint, cover, direction, mode):
        if not cover:
            return None
        best = None
        for m in cover:
            v = exit_vertex(points[endpoint], direction, actives[m], mode, covered_by_poly[m], eps) \
                if (~covered_by_poly[m]).any() else None
            if v is None:
                continue
            dist = math.hypot(*(actives[m].vertices[v] - points[endpoint]))
            if best is None or dist < best[0] - eps:
                best = (dist, node_of[(m, v)])
        if best is None:
            raise UnplannableError(f"{mode} point is covered and no obstacle vertex is reachable")
        node = best[1]
        wt = math.hypot(*(points[node] - points[endpoint]))
        adjacency[endpoint][node] = wt
        adjacency[node][endpoint] = wt
        return node

    start_exit = link(START, s_cover, heading, "start")
    goal_entry = link(GOAL, g_cover, arrive, "goal")
    return VisibilityGraph(points, origins, adjacency, start_exit, goal_entry)
