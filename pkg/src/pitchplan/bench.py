"""Timing suites for the planner and both tracker variants.

Layouts come from a seeded generator so repeated runs time identical work.
Set ``PITCHPLAN_THREADS`` to run repetitions in that many worker processes;
each timing is still taken inside a single call.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .cfmpc import LINEAR, NONLINEAR, Controller, MpcConfig
from .davg import PlannerConfig, plan
from .dynamics import Pose, step
from .obstacles import Obstacle
from .trajectory import interpolate
from .visibility import UnplannableError

FIELD = (14.0, 9.0)
DAVG_OBSTACLES = (2, 4, 6, 8)
DAVG_SIDES = (4, 10)
MPC_HORIZONS = (5, 10, 15, 20)


@dataclass(frozen=True)
class BenchRow:
    suite: str
    n_obs: int
    param: int  # N_arc for the planner, N_step for the trackers
    mean_ms: float
    median_ms: float
    p95_ms: float
    samples: int

    def as_list(self) -> list:
        return [self.suite, self.n_obs, self.param, self.mean_ms, self.median_ms, self.p95_ms, self.samples]


COLUMNS = ("suite", "n_obs", "param", "mean_ms", "median_ms", "p95_ms", "samples")


def random_layout(rng: np.random.Generator, n_obs: int, radius=(0.3, 0.6), clearance: float = 1.0):
    """Start/goal across the field and ``n_obs`` disks kept clear of both."""
    w, h = FIELD
    S = Pose(1.0, float(rng.uniform(1.5, h - 1.5)), float(rng.uniform(-math.pi, math.pi)))
    G = Pose(w - 1.0, float(rng.uniform(1.5, h - 1.5)), 0.0)
    obs = []
    while len(obs) < n_obs:
        r = float(rng.uniform(*radius))
        c = rng.uniform((2.5, 0.5), (w - 2.5, h - 0.5))
        if min(math.hypot(c[0] - p.x, c[1] - p.y) for p in (S, G)) < r + clearance:
            continue
        obs.append(Obstacle(tuple(c), r, len(obs)))
    return S, G, obs


def davg_layouts(n_obs: int, seed: int, repetitions: int) -> list:
    """The planning problems timed by the DAVG suite for one grid cell."""
    rng = np.random.default_rng(seed)
    return [random_layout(rng, n_obs) for _ in range(repetitions)]


def mpc_layouts(seed: int, repetitions: int) -> list:
    """Straight runs with two disks just beside the line, so both constraints bind."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(repetitions):
        y0 = float(rng.uniform(3.0, 6.0))
        obs = [Obstacle((float(rng.uniform(4.0, 5.0)), y0 + float(rng.uniform(0.55, 0.8))), 0.4, 0),
               Obstacle((float(rng.uniform(8.0, 9.0)), y0 - float(rng.uniform(0.55, 0.8))), 0.4, 1)]
        out.append((Pose(1.0, y0, 0.0), Pose(13.0, y0, 0.0), obs))
    return out


def _time_davg(args):
    cells, layouts, lo, hi = args
    out = {c: [] for c in cells}
    # cells take turns inside each repetition so slow drift of the machine hits all of them alike
    for r in range(lo, hi):
        for n_obs, n_sides in cells:
            S, G, obs = layouts[n_obs][r]
            try:
                out[n_obs, n_sides].append(plan(S, G, obs, PlannerConfig(n_sides=n_sides)).solve_time)
            except UnplannableError:
                continue
    return out


def _time_mpc(args):
    mode, horizons, layouts, ticks = args
    out = {N: [] for N in horizons}
    for S, G, obs in layouts:
        for N in horizons:
            cfg = MpcConfig(N=N)
            path = plan(S, G, [o.inflated(cfg.robot_radius + 0.1) for o in obs])
            traj = interpolate(path, S.theta, dt=cfg.dt)
            ctl = Controller(cfg, mode)
            X = S
            for k in range(ticks):
                u = ctl.step(X, k * cfg.dt, traj, obs)
                if ctl.last is not None:
                    out[N].append(ctl.last.solve_time)
                X = step(X, u, cfg.dt)
    return out


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("PITCHPLAN_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, jobs):
    n = _workers()
    if n == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(n) as ex:
        return list(ex.map(fn, jobs))


def _summary(suite, n_obs, param, samples) -> BenchRow:
    a = np.asarray(samples, dtype=float) * 1e3
    if a.size == 0:
        return BenchRow(suite, n_obs, param, math.nan, math.nan, math.nan, 0)
    return BenchRow(suite, n_obs, param, float(a.mean()), float(np.median(a)), float(np.percentile(a, 95)), int(a.size))


def _ranges(reps: int, parts: int) -> list[tuple[int, int]]:
    base, extra = divmod(reps, parts)
    out, lo = [], 0
    for i in range(parts):
        hi = lo + base + (i < extra)
        if hi > lo:
            out.append((lo, hi))
        lo = hi
    return out


def _merge(parts, keys):
    return {k: [v for part in parts for v in part[k]] for k in keys}


def davg_suite(repetitions: int = 50, seed: int = 0, obstacles=DAVG_OBSTACLES, sides=DAVG_SIDES) -> list[BenchRow]:
    cells = [(n, s) for n in obstacles for s in sides]
    layouts = {n: davg_layouts(n, seed, repetitions) for n in obstacles}
    jobs = [(cells, layouts, lo, hi) for lo, hi in _ranges(repetitions, _workers())]
    samples = _merge(_map(_time_davg, jobs), cells)
    return [_summary("davg", n, s, samples[n, s]) for n, s in cells]


def mpc_suite(mode: str = LINEAR, repetitions: int = 5, seed: int = 0, horizons=MPC_HORIZONS,
              ticks: int = 40) -> list[BenchRow]:
    if mode not in (LINEAR, NONLINEAR):
        raise ValueError(f"unknown mode {mode!r}")
    horizons = tuple(horizons)
    layouts = mpc_layouts(seed, repetitions)
    jobs = [(mode, horizons, layouts[lo:hi], ticks) for lo, hi in _ranges(repetitions, _workers())]
    samples = _merge(_map(_time_mpc, jobs), horizons)
    name = "lmpc" if mode == LINEAR else "nmpc"
    return [_summary(name, 2, N, samples[N]) for N in horizons]


SUITES = ("davg", "lmpc", "nmpc")


def run_suite(suite: str, repetitions: int, seed: int = 0) -> list[BenchRow]:
    if suite == "davg":
        return davg_suite(repetitions, seed)
    if suite == "lmpc":
        return mpc_suite(LINEAR, repetitions, seed)
    if suite == "nmpc":
        return mpc_suite(NONLINEAR, repetitions, seed)
    raise ValueError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)}")


__all__ = ["BenchRow", "COLUMNS", "SUITES", "random_layout", "davg_layouts", "mpc_layouts", "davg_suite",
           "mpc_suite", "run_suite"]
