"""Discrete planar kinematics with body-frame velocity inputs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import wrap_angle


class Pose(NamedTuple):
    x: float
    y: float
    theta: float

    def wrapped(self) -> "Pose":
        return Pose(self.x, self.y, wrap_angle(self.theta))


class BodyInput(NamedTuple):
    vx: float
    vy: float
    omega: float


ZERO_INPUT = BodyInput(0.0, 0.0, 0.0)


def step(X, u, dt: float) -> Pose:
    """Advance pose ``X`` by body-frame input ``u`` over ``dt`` seconds."""
    x, y, th = X
    vx, vy, w = u
    c, s = math.cos(th), math.sin(th)
    return Pose(x + (c * vx - s * vy) * dt, y + (s * vx + c * vy) * dt, wrap_angle(th + w * dt))


def step_array(X: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Unwrapped ``step`` on arrays; rows are states/inputs."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(u, dtype=float)
    c, s = np.cos(X[..., 2]), np.sin(X[..., 2])
    out = np.empty(np.broadcast(X, u).shape)
    out[..., 0] = X[..., 0] + (c * u[..., 0] - s * u[..., 1]) * dt
    out[..., 1] = X[..., 1] + (s * u[..., 0] + c * u[..., 1]) * dt
    out[..., 2] = X[..., 2] + u[..., 2] * dt
    return out


@dataclass(frozen=True)
class LinearizedDynamics:
    A: np.ndarray
    B: np.ndarray
    X_r: Pose
    u_r: BodyInput
    dt: float


def jacobians(X: np.ndarray, u: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Stacked Jacobians for ``(N, 3)`` states and inputs: ``A``, ``B`` of shape ``(N, 3, 3)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n = len(X)
    c, s = np.cos(X[:, 2]), np.sin(X[:, 2])
    A = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
    A[:, 0, 2] = (-s * u[:, 0] - c * u[:, 1]) * dt
    A[:, 1, 2] = (c * u[:, 0] - s * u[:, 1]) * dt
    B = np.zeros((n, 3, 3))
    B[:, 0, 0] = c * dt
    B[:, 0, 1] = -s * dt
    B[:, 1, 0] = s * dt
    B[:, 1, 1] = c * dt
    B[:, 2, 2] = dt
    return A, B


def linearize(X_r, u_r, dt: float) -> LinearizedDynamics:
    if not dt > 0:
        raise ValueError("dt must be positive")
    A, B = jacobians(np.asarray(X_r, dtype=float), np.asarray(u_r, dtype=float), dt)
    return LinearizedDynamics(A[0], B[0], Pose(*map(float, X_r)), BodyInput(*map(float, u_r)), dt)
