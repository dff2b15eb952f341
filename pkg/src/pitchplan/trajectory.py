"""Time-stamped reference built by linear interpolation of planner waypoints.

Each path segment becomes a turn-in-place phase followed by a straight phase
at constant speed, so the reference position never leaves the polyline.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import BodyInput, Pose
from .geometry import wrap_angle, wrap_angles

DEFAULT_V_NOM = 1.5
DEFAULT_OMEGA_NOM = 1.5
DEFAULT_DT = 0.25


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Knot arrays; ``theta`` is stored unwrapped so it interpolates linearly.

    ``u[k]`` is the reference input held from knot ``k`` to knot ``k + 1``;
    the last knot carries a zero input.
    """

    t: np.ndarray
    xy: np.ndarray
    theta: np.ndarray
    u: np.ndarray

    @property
    def total_duration(self) -> float:
        return float(self.t[-1])

    @property
    def knots(self) -> list[tuple[float, Pose, BodyInput]]:
        return [(float(t), Pose(float(p[0]), float(p[1]), wrap_angle(float(th))), BodyInput(*map(float, u)))
                for t, p, th, u in zip(self.t, self.xy, self.theta, self.u)]

    def polyline(self) -> np.ndarray:
        """Distinct positions visited, in order."""
        keep = np.ones(len(self.xy), bool)
        keep[1:] = np.any(np.abs(np.diff(self.xy, axis=0)) > 1e-12, axis=1)
        return self.xy[keep]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "theta", "vx", "vy", "omega"])
            for t, pose, u in self.knots:
                w.writerow([repr(t), repr(pose.x), repr(pose.y), repr(pose.theta),
                            repr(u.vx), repr(u.vy), repr(u.omega)])


def interpolate(path, start_heading: float, v_nom: float = DEFAULT_V_NOM,
                omega_nom: float = DEFAULT_OMEGA_NOM, dt: float = DEFAULT_DT,
                goal_heading: float | None = None) -> Trajectory:
    """Rotate-then-translate reference through the waypoints of ``path``.

    ``path`` is a :class:`~pitchplan.davg.PathResult` or an ``(n, 2)`` array.
    Knots fall on every multiple of ``dt`` plus every phase boundary. When
    ``goal_heading`` is given a final turn-in-place phase aligns with it.
    """
    if not (v_nom > 0 and omega_nom > 0 and dt > 0):
        raise ValueError("v_nom, omega_nom and dt must be positive")
    wp = np.asarray(getattr(path, "waypoints", path), dtype=float).reshape(-1, 2)
    if len(wp) == 0:
        raise ValueError("empty path")

    # phases: (duration, start xy, velocity xy, start heading, heading rate, body input)
    phases = []
    heading = float(start_heading)
    pos = wp[0]

    def rotate_to(target):
        nonlocal heading
        delta = wrap_angle(target - heading)
        if abs(delta) > 1e-12:
            w = math.copysign(omega_nom, delta)
            phases.append((abs(delta) / omega_nom, pos, np.zeros(2), heading, w, (0.0, 0.0, w)))
            heading += delta

    for nxt in wp[1:]:
        seg = nxt - pos
        length = math.hypot(*seg)
        if length <= 1e-12:
            continue
        rotate_to(math.atan2(seg[1], seg[0]))
        phases.append((length / v_nom, pos, seg / length * v_nom, heading, 0.0, (v_nom, 0.0, 0.0)))
        pos = nxt
    if goal_heading is not None:
        rotate_to(goal_heading)

    t_list, xy_list, th_list, u_list = [], [], [], []
    t0 = 0.0
    for dur, p0, vel, h0, w, u in phases:
        # interior grid points, then the phase start itself
        k0 = math.floor(t0 / dt + 1e-9) + 1
        times = [t0] + [k * dt for k in range(k0, math.ceil((t0 + dur) / dt - 1e-9))
                        if k * dt > t0 + 1e-9]
        for tk in times:
            tau = tk - t0
            t_list.append(tk)
            xy_list.append(p0 + vel * tau)
            th_list.append(h0 + w * tau)
            u_list.append(u)
        t0 += dur
    t_list.append(t0)
    xy_list.append(pos)
    th_list.append(heading)
    u_list.append((0.0, 0.0, 0.0))
    return Trajectory(np.array(t_list), np.array(xy_list, dtype=float).reshape(-1, 2),
                      np.array(th_list), np.array(u_list, dtype=float).reshape(-1, 3))


def _locate(traj: Trajectory, t: np.ndarray):
    t = np.clip(t, traj.t[0], traj.t[-1])
    k = np.clip(np.searchsorted(traj.t, t, side="right") - 1, 0, len(traj.t) - 1)
    k1 = np.minimum(k + 1, len(traj.t) - 1)
    span = traj.t[k1] - traj.t[k]
    a = np.where(span > 0, (t - traj.t[k]) / np.where(span > 0, span, 1.0), 0.0)
    return k, k1, a


def sample_many(traj: Trajectory, times) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`sample`: ``(n, 3)`` poses (wrapped) and ``(n, 3)`` inputs."""
    times = np.asarray(times, dtype=float)
    k, k1, a = _locate(traj, times)
    xy = traj.xy[k] + a[:, None] * (traj.xy[k1] - traj.xy[k])
    th = traj.theta[k] + a * (traj.theta[k1] - traj.theta[k])
    u = traj.u[k].copy()
    u[times >= traj.t[-1]] = 0.0
    return np.column_stack((xy, wrap_angles(th))), u


def sample(traj: Trajectory, t: float) -> tuple[Pose, BodyInput]:
    X, u = sample_many(traj, [t])
    return Pose(*map(float, X[0])), BodyInput(*map(float, u[0]))


def reference_window(traj: Trajectory, t0: float, N: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Reference states ``(N + 1, 3)`` and inputs ``(N, 3)`` starting at ``t0``.

    Inputs are rebuilt from consecutive sampled poses so that stepping the
    discrete model from ``X_r[k]`` with ``u_r[k]`` lands on ``X_r[k + 1]``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    X, _ = sample_many(traj, t0 + dt * np.arange(N + 1))
    return X, reconstruct_inputs(X, dt)


def reconstruct_inputs(X: np.ndarray, dt: float) -> np.ndarray:
    dp = np.diff(X[:, :2], axis=0) / dt
    c, s = np.cos(X[:-1, 2]), np.sin(X[:-1, 2])
    u = np.empty((len(X) - 1, 3))
    u[:, 0] = c * dp[:, 0] + s * dp[:, 1]
    u[:, 1] = -s * dp[:, 0] + c * dp[:, 1]
    u[:, 2] = wrap_angles(np.diff(X[:, 2])) / dt
    return u
