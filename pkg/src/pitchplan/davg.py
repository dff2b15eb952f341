"""Dynamic augmented visibility graph (DAVG) planner.

States of the augmented graph are directed visibility edges ``(past, current)``
so a transition ``(i, j) -> (j, k)`` knows the turn taken at ``j`` and can
price it next to the distance ``|jk|``.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import EPS, GeometryError, Point2
from .obstacles import DEFAULT_N_SIDES, Obstacle, active_set, polygonize
from .visibility import GOAL, START, UnplannableError, VisibilityGraph, build_visibility_graph

__all__ = [
    "PlannerConfig", "AugmentedGraph", "PathResult", "UnplannableError",
    "edge_weight", "build_augmented", "shortest_path", "plan", "path_turns",
]


@dataclass(frozen=True)
class PlannerConfig:
    turn_weight: float = 1.0  # meters of detour one radian of turning is worth
    n_sides: int = DEFAULT_N_SIDES
    phase: float = 0.0
    start_heading: float | None = None  # None: no penalty for the first leg's direction
    eps: float = EPS
    region_margin: float = 0.0
    use_active_set: bool = True

    def __post_init__(self):
        if not self.turn_weight >= 0:
            raise ValueError(f"turn_weight must be >= 0, got {self.turn_weight}")


def edge_weight(d: float, dtheta: float, lam: float) -> float:
    return d + lam * dtheta


@dataclass
class AugmentedGraph:
    states: list[tuple[int, int]]  # state id -> (past node, current node); 0 is SS, 1 is GG
    targets: list[list[int]]
    weights: list[list[float]]
    vg: VisibilityGraph
    turn_weight: float
    start_heading: float | None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(s, t, w) for s in range(len(self.states))
                for t, w in zip(self.targets[s], self.weights[s])]


@dataclass
class PathResult:
    waypoints: list[Point2]
    cost: float
    distance: float
    total_turn: float
    solve_time: float = 0.0
    nodes: list[int] | None = None  # visibility-graph node ids along the path
    graph: VisibilityGraph | None = field(default=None, repr=False)

    def as_array(self) -> np.ndarray:
        return np.array(self.waypoints, dtype=float).reshape(-1, 2)


def _turns(din: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """Pairwise unsigned turn angles between rows of ``din`` and rows of ``dout``."""
    cross = din[:, None, 0] * dout[None, :, 1] - din[:, None, 1] * dout[None, :, 0]
    dot = din[:, None, 0] * dout[None, :, 0] + din[:, None, 1] * dout[None, :, 1]
    return np.abs(np.arctan2(cross, dot))


def build_augmented(vg: VisibilityGraph, cfg: PlannerConfig) -> AugmentedGraph:
    lam = cfg.turn_weight
    pts = vg.points
    n = len(pts)
    states: list[tuple[int, int]] = [(START, START), (GOAL, GOAL)]
    index: dict[tuple[int, int], int] = {}
    for i in range(n):
        for j in sorted(vg.adjacency[i]):
            index[(i, j)] = len(states)
            states.append((i, j))
    targets: list[list[int]] = [[] for _ in states]
    weights: list[list[float]] = [[] for _ in states]

    for j in range(n):
        nbrs = sorted(vg.adjacency[j])
        if not nbrs:
            continue
        nb = np.array(nbrs)
        vec = pts[nb] - pts[j]
        dist = np.hypot(vec[:, 0], vec[:, 1])
        out_dir = vec / dist[:, None]
        out_states = [index[(j, k)] for k in nbrs]
        # entering j from neighbour i travels along -out_dir[i]
        w = dist[None, :] + lam * _turns(-out_dir, out_dir)
        for a, i in enumerate(nbrs):
            s = index[(i, j)]
            targets[s] = list(out_states)
            weights[s] = w[a].tolist()
            if j == GOAL:
                targets[s].append(1)
                weights[s].append(0.0)
        if j == START:
            if cfg.start_heading is None:
                w0 = dist
            else:
                h = np.array([[math.cos(cfg.start_heading), math.sin(cfg.start_heading)]])
                w0 = dist + lam * _turns(h, out_dir)[0]
            targets[0] = list(out_states)
            weights[0] = w0.tolist()
    return AugmentedGraph(states, targets, weights, vg, lam, cfg.start_heading)


def path_turns(waypoints: np.ndarray, start_heading: float | None) -> tuple[float, float]:
    """Total length and total unsigned turning of a polyline."""
    wp = np.asarray(waypoints, dtype=float)
    seg = np.diff(wp, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    dirs = seg / lengths[:, None]
    turn = 0.0
    if start_heading is not None and len(dirs):
        turn += float(_turns(np.array([[math.cos(start_heading), math.sin(start_heading)]]), dirs[:1])[0, 0])
    for a, b in zip(dirs[:-1], dirs[1:]):
        turn += float(_turns(a[None], b[None])[0, 0])
    return float(lengths.sum()), turn


def shortest_path(ag: AugmentedGraph) -> PathResult:
    """Dijkstra from SS to GG with a binary heap; equal costs pop in state-id order."""
    t0 = time.perf_counter()
    n = len(ag.states)
    dist = [math.inf] * n
    prev = [-1] * n
    done = [False] * n
    dist[0] = 0.0
    heap = [(0.0, 0)]
    targets, weights = ag.targets, ag.weights
    while heap:
        d, s = heapq.heappop(heap)
        if done[s]:
            continue
        done[s] = True
        if s == 1:
            break
        for t, w in zip(targets[s], weights[s]):
            nd = d + w
            if nd < dist[t]:
                dist[t] = nd
                prev[t] = s
                heapq.heappush(heap, (nd, t))
    if not done[1]:
        raise UnplannableError("goal is unreachable in the visibility graph")
    chain = []
    s = 1
    while s != -1:
        chain.append(s)
        s = prev[s]
    chain.reverse()
    nodes = [ag.states[s][1] for s in chain[:-1]]
    pts = ag.vg.points[nodes]
    distance, turn = path_turns(pts, ag.start_heading)
    return PathResult([Point2(*p) for p in pts.tolist()], dist[1], distance, turn,
                      time.perf_counter() - t0, nodes)


def _as_pose(p):
    p = tuple(float(v) for v in p)
    return p if len(p) == 3 else (p[0], p[1], None)


def plan(S, G, obstacles: Sequence[Obstacle], cfg: PlannerConfig = PlannerConfig()) -> PathResult:
    """Plan from pose ``S`` to pose ``G`` around disk obstacles.

    ``S`` and ``G`` are ``(x, y, theta)``; the start heading prices the first
    turn. The goal heading is ignored, final reorientation is the tracker's job.
    """
    t0 = time.perf_counter()
    sx, sy, sth = _as_pose(S)
    gx, gy, _ = _as_pose(G)
    if math.hypot(gx - sx, gy - sy) <= cfg.eps:
        raise GeometryError("start and goal positions coincide")
    if sth is not None and cfg.start_heading is None:
        cfg = replace(cfg, start_heading=sth)
    polys = [polygonize(o, cfg.n_sides, cfg.phase) for o in obstacles]
    if cfg.use_active_set:
        polys, _ = active_set(polys, (sx, sy), (gx, gy), cfg.region_margin, cfg.eps)
    vg = build_visibility_graph((sx, sy), (gx, gy), polys, cfg.start_heading, eps=cfg.eps)
    result = shortest_path(build_augmented(vg, cfg))
    result.solve_time = time.perf_counter() - t0
    result.graph = vg
    return result
