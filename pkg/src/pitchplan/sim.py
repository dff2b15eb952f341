"""Deterministic closed-loop simulation: DAVG planning plus cf-MPC tracking.

Obstacles may appear mid-run (``appear_time``) and drift at constant velocity.
The controller sees a noisy pose; truth is propagated with the same kinematic
model, optionally with input scaling and a first-order input lag.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cfmpc import FAILED, LINEAR, Controller, MpcConfig
from .davg import PlannerConfig, plan
from .dynamics import BodyInput, Pose, ZERO_INPUT, step
from .geometry import GeometryError, polyline_distance, wrap_angle
from .obstacles import Obstacle
from .trajectory import DEFAULT_OMEGA_NOM, DEFAULT_V_NOM, Trajectory, interpolate, sample_many
from .visibility import UnplannableError

REACHED = "reached"
TIMEOUT = "timeout"
COLLISION = "collision"
UNPLANNABLE = "unplannable"


@dataclass(frozen=True)
class ScenarioObstacle:
    obstacle: Obstacle
    appear_time: float = 0.0
    velocity: tuple[float, float] = (0.0, 0.0)

    def at(self, t: float) -> Obstacle | None:
        if t < self.appear_time - 1e-12:
            return None
        dt = t - self.appear_time
        c = self.obstacle.center
        return Obstacle((c.x + self.velocity[0] * dt, c.y + self.velocity[1] * dt),
                        self.obstacle.radius, self.obstacle.id)


@dataclass(frozen=True)
class Scenario:
    start: Pose
    goal: Pose
    obstacles: tuple[ScenarioObstacle, ...] = ()
    field_size: tuple[float, float] = (14.0, 9.0)
    noise_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    mode: str = LINEAR
    v_nom: float = DEFAULT_V_NOM
    omega_nom: float = DEFAULT_OMEGA_NOM
    plan_margin: float = 0.1  # planner inflation on top of R_obs + robot_radius
    control_dt: float | None = None  # defaults to the MPC step
    max_time: float = 60.0
    replan_period: float = 1.0
    cross_track_limit: float = 0.5
    goal_tolerance: tuple[float, float] = (0.1, 0.2)
    realtime: bool = False
    input_scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    input_lag: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "start", Pose(*map(float, self.start)))
        object.__setattr__(self, "goal", Pose(*map(float, self.goal)))
        object.__setattr__(self, "obstacles", tuple(
            o if isinstance(o, ScenarioObstacle) else ScenarioObstacle(o) for o in self.obstacles))
        w, h = self.field_size
        for name in ("start", "goal"):
            p = getattr(self, name)
            if not (0.0 <= p.x <= w and 0.0 <= p.y <= h):
                raise ValueError(f"{name} ({p.x}, {p.y}) lies outside the {w} x {h} field")
        if not 0.0 <= self.input_lag < 1.0:
            raise ValueError("input_lag must be in [0, 1)")

    @property
    def dt(self) -> float:
        return self.control_dt if self.control_dt is not None else self.mpc.dt

    def obstacles_at(self, t: float) -> list[Obstacle]:
        return [o for o in (so.at(t) for so in self.obstacles) if o is not None]


@dataclass
class ActivePlan:
    """A trajectory in use plus what the world looked like when it was planned."""

    id: int
    trajectory: Trajectory
    t0: float
    waypoints: np.ndarray
    snapshot: dict = field(default_factory=dict)  # obstacle key -> (x, y, radius)


@dataclass
class TickRecord:
    t: float
    true_pose: Pose
    measured: Pose
    traj_id: int
    command: BodyInput
    slacks: np.ndarray
    plan_time: float
    solve_time: float
    status: str


@dataclass
class ReplanEvent:
    t: float
    traj_id: int
    reason: str
    ok: bool
    waypoints: np.ndarray | None = None
    plan_time: float = 0.0


@dataclass
class SimLog:
    records: list[TickRecord] = field(default_factory=list)
    replans: list[ReplanEvent] = field(default_factory=list)
    outcome: str = TIMEOUT
    paths: dict[int, np.ndarray] = field(default_factory=dict)

    CSV_COLUMNS = ("t", "x", "y", "theta", "meas_x", "meas_y", "meas_theta", "traj_id",
                   "vx", "vy", "omega", "max_slack", "status", "plan_ms", "solve_ms")

    def rows(self, timing: bool = True) -> list[list]:
        out = []
        for r in self.records:
            row = [r.t, *r.true_pose, *r.measured, r.traj_id, *r.command,
                   float(np.max(r.slacks, initial=0.0)), r.status]
            if timing:
                row += [r.plan_time * 1e3, r.solve_time * 1e3]
            out.append(row)
        return out

    def to_csv(self, path, timing: bool = True) -> None:
        cols = self.CSV_COLUMNS if timing else self.CSV_COLUMNS[:-2]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in self.rows(timing):
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def fingerprint(self) -> str:
        """Hash of everything except wall-clock timings."""
        h = hashlib.sha256()
        for row in self.rows(timing=False):
            h.update(repr(row).encode())
        for e in self.replans:
            h.update(repr((e.t, e.traj_id, e.reason, e.ok)).encode())
            if e.waypoints is not None:
                h.update(np.ascontiguousarray(e.waypoints).tobytes())
        h.update(self.outcome.encode())
        return h.hexdigest()

    @property
    def true_path(self) -> np.ndarray:
        return np.array([r.true_pose[:2] for r in self.records]).reshape(-1, 2)


def _key(o: Obstacle, i: int):
    return o.id if o.id is not None else i


def _remaining_polyline(ap: ActivePlan, t: float) -> np.ndarray:
    tau = t - ap.t0
    traj = ap.trajectory
    here, _ = sample_many(traj, [tau])
    later = traj.xy[traj.t > tau]
    return np.vstack((here[:, :2], later))


def replan_reason(pose, ap: ActivePlan | None, obstacles: Sequence[Obstacle], t: float,
                  sc: Scenario) -> str | None:
    """Why the active plan should be replaced now, or ``None``."""
    if ap is None:
        return "initial"
    rem = _remaining_polyline(ap, t)
    rr = sc.mpc.robot_radius
    for i, o in enumerate(obstacles):
        k = _key(o, i)
        snap = ap.snapshot.get(k)
        unchanged = snap is not None and math.hypot(o.center.x - snap[0], o.center.y - snap[1]) <= 0.05 \
            and o.radius <= snap[2] + 1e-12
        if unchanged:
            continue
        if polyline_distance(o.center, rem) < o.radius + rr:
            return "obstacle"
    near_goal = math.hypot(pose[0] - sc.goal.x, pose[1] - sc.goal.y) < 3 * sc.goal_tolerance[0]
    if near_goal:
        return None
    if polyline_distance(pose[:2], rem) > sc.cross_track_limit:
        return "off_track"
    if t - ap.t0 >= sc.replan_period - 1e-9:
        return "periodic"
    return None


def replan_trigger(pose, ap: ActivePlan | None, obstacles: Sequence[Obstacle], t: float,
                   sc: Scenario) -> bool:
    return replan_reason(pose, ap, obstacles, t, sc) is not None


def _make_plan(pose: Pose, obstacles: Sequence[Obstacle], sc: Scenario, traj_id: int, t: float):
    infl = sc.mpc.robot_radius + sc.plan_margin
    path = plan(pose, sc.goal, [o.inflated(infl) for o in obstacles], sc.planner)
    traj = interpolate(path, pose.theta, sc.v_nom, sc.omega_nom, sc.mpc.dt, goal_heading=sc.goal.theta)
    snap = {_key(o, i): (o.center.x, o.center.y, o.radius) for i, o in enumerate(obstacles)}
    return ActivePlan(traj_id, traj, t, path.as_array(), snap), path.solve_time


def _hold_plan(pose: Pose, sc: Scenario, traj_id: int, t: float, obstacles) -> ActivePlan:
    # start and goal coincide: a pure turn-in-place toward the goal heading
    traj = interpolate(np.array([pose[:2]]), pose.theta, sc.v_nom, sc.omega_nom, sc.mpc.dt,
                       goal_heading=sc.goal.theta)
    snap = {_key(o, i): (o.center.x, o.center.y, o.radius) for i, o in enumerate(obstacles)}
    return ActivePlan(traj_id, traj, t, np.array([pose[:2]]), snap)


def run(sc: Scenario) -> SimLog:
    """Simulate ``sc`` until the goal is reached, a collision, or ``max_time``."""
    rng = np.random.default_rng(sc.seed)
    dt = sc.dt
    ctl = Controller(sc.mpc, sc.mode)
    log = SimLog()
    truth = sc.start
    ap: ActivePlan | None = None
    next_id = 0
    u_prev = ZERO_INPUT
    scale = np.asarray(sc.input_scale, dtype=float)
    std = np.asarray(sc.noise_std, dtype=float)
    n_ticks = int(math.floor(sc.max_time / dt + 1e-9))

    for k in range(n_ticks + 1):
        t = k * dt
        obstacles = sc.obstacles_at(t)
        for o in obstacles:
            if math.hypot(truth.x - o.center.x, truth.y - o.center.y) < o.radius:
                log.outcome = COLLISION
                return log
        gx, gy = truth.x - sc.goal.x, truth.y - sc.goal.y
        if math.hypot(gx, gy) <= sc.goal_tolerance[0] and \
                abs(wrap_angle(truth.theta - sc.goal.theta)) <= sc.goal_tolerance[1]:
            log.outcome = REACHED
            return log
        if k == n_ticks:
            break

        noise = rng.normal(0.0, 1.0, 3) * std
        measured = Pose(truth.x + noise[0], truth.y + noise[1], wrap_angle(truth.theta + noise[2]))

        plan_time = 0.0
        reason = replan_reason(measured, ap, obstacles, t, sc)
        if reason is not None:
            try:
                if math.hypot(measured.x - sc.goal.x, measured.y - sc.goal.y) <= sc.planner.eps:
                    new, plan_time = _hold_plan(measured, sc, next_id, t, obstacles), 0.0
                else:
                    new, plan_time = _make_plan(measured, obstacles, sc, next_id, t)
                log.replans.append(ReplanEvent(t, next_id, reason, True, new.waypoints, plan_time))
                log.paths[next_id] = new.waypoints
                ap = new
                next_id += 1
            except (UnplannableError, GeometryError):
                log.replans.append(ReplanEvent(t, -1, reason, False))
                if ap is None:
                    log.outcome = UNPLANNABLE
                    return log

        u = ctl.step(measured, t - ap.t0, ap.trajectory, obstacles)
        sol = ctl.last
        solve_time = sol.solve_time if sol is not None else 0.0
        status = sol.status if sol is not None else FAILED
        if sc.realtime and plan_time + solve_time > dt:
            u = u_prev
        applied = BodyInput(*(sc.input_lag * np.asarray(u_prev) + (1.0 - sc.input_lag) * scale * np.asarray(u)))
        log.records.append(TickRecord(t, truth, measured, ap.id, BodyInput(*map(float, u)),
                                      sol.slacks.copy() if sol is not None else np.zeros(0),
                                      plan_time, solve_time, status))
        truth = step(truth, applied, dt)
        u_prev = applied
    log.outcome = TIMEOUT
    return log


__all__ = [
    "Scenario", "ScenarioObstacle", "SimLog", "TickRecord", "ReplanEvent", "ActivePlan",
    "run", "replan_trigger", "replan_reason", "REACHED", "TIMEOUT", "COLLISION", "UNPLANNABLE",
]
