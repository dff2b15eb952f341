"""Collision-free MPC (cf-MPC) for trajectory tracking.

One formulation handles both tracking and avoidance: every obstacle is always
present in the problem through a keep-out constraint relaxed by a nonnegative
slack that is penalized quadratically. The linear variant replaces dynamics by
their Jacobians along the reference and each disk by its tangent half-plane;
the nonlinear variant is solved by sequential quadratic programming on the
exact model and circular constraints.

Decision vector layout (both variants)::

    [ dX_1 .. dX_N | du_0 .. du_{N-1} | slacks ]

where ``dX``/``du`` are deviations from the reference (linear) or from the
current SQP iterate (nonlinear).
"""
from __future__ import annotations

import functools
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import qp
from .dynamics import BodyInput, Pose, ZERO_INPUT, jacobians, step_array
from .geometry import wrap_angles
from .obstacles import Obstacle
from .trajectory import Trajectory, reference_window

log = logging.getLogger(__name__)

LINEAR = "linear"
NONLINEAR = "nonlinear"

SOLVED = "solved"
DEGRADED = "degraded"
FAILED = "failed"


class ConstraintDropWarning(RuntimeWarning):
    """A tangent-plane constraint was dropped because its normal vanished."""


@dataclass(frozen=True)
class MpcConfig:
    N: int = 10
    dt: float = 0.25
    Q: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0, 4.0]))
    R: np.ndarray = field(default_factory=lambda: np.diag([1.0, 1.0, 1.0]))
    rho: float = 100.0
    u_min: tuple[float, float, float] = (-1.0, -1.0, -2.0)
    u_max: tuple[float, float, float] = (2.0, 1.0, 2.0)
    robot_radius: float = 0.3
    per_step_slack: bool = False
    # "deviation" penalizes (u - u_r)'R(u - u_r); "absolute" penalizes u'Ru
    input_cost: str = "deviation"
    sqp_max_iter: int = 20
    sqp_step_tol: float = 1e-4
    feasibility_tol: float = 1e-4
    qp_settings: qp.QpSettings = field(default_factory=qp.QpSettings)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        for name in ("Q", "R"):
            M = np.asarray(getattr(self, name), dtype=float)
            if M.ndim == 1:
                M = np.diag(M)
            if M.shape != (3, 3) or np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) < -1e-12:
                raise ValueError(f"{name} must be a 3x3 positive semidefinite matrix")
            object.__setattr__(self, name, M)
        if self.input_cost not in ("deviation", "absolute"):
            raise ValueError("input_cost must be 'deviation' or 'absolute'")
        if np.any(np.asarray(self.u_min) > np.asarray(self.u_max)):
            raise ValueError("u_min exceeds u_max")

    def n_slacks(self, n_obs: int) -> int:
        return n_obs * (self.N if self.per_step_slack else 1)


@dataclass
class MpcSolution:
    states: np.ndarray  # (N, 3) predicted X_1..X_N, headings wrapped
    inputs: np.ndarray  # (N, 3) u_0..u_{N-1}
    slacks: np.ndarray  # (n_obs,) or (N, n_obs)
    objective: float
    solve_time: float
    status: str
    qp_iterations: int = 0
    sqp_iterations: int = 0
    qp_status: str = ""
    diagnostics: list[str] = field(default_factory=list)
    x: np.ndarray | None = field(default=None, repr=False)
    y: np.ndarray | None = field(default=None, repr=False)

    @property
    def command(self) -> BodyInput:
        return BodyInput(*map(float, self.inputs[0]))


class _Layout:
    def __init__(self, N: int, n_obs: int, cfg: MpcConfig):
        self.N = N
        self.n_obs = n_obs
        self.ns = cfg.n_slacks(n_obs)
        self.ix = 0
        self.iu = 3 * N
        self.isl = 6 * N
        self.n = 6 * N + self.ns
        self.r_dyn = 0
        self.r_col = 3 * N
        self.r_inp = 3 * N + N * n_obs
        self.r_sl = self.r_inp + 3 * N
        self.m = self.r_sl + self.ns

    def slack_index(self, k: int, j: int) -> int:
        # k is 1-based horizon step
        if self.ns == self.n_obs:
            return self.isl + j
        return self.isl + (k - 1) * self.n_obs + j


def _centers_radii(obstacles: Sequence[Obstacle], cfg: MpcConfig):
    c = np.array([[o.center.x, o.center.y] for o in obstacles], dtype=float).reshape(-1, 2)
    r = np.array([o.radius + cfg.robot_radius for o in obstacles], dtype=float)
    return c, r


@functools.lru_cache(maxsize=16)
def _hessian(N: int, ns: int, Q: bytes, R: bytes, rho: float) -> np.ndarray:
    """Block-diagonal cost Hessian; depends only on the layout and weights."""
    n = 6 * N + ns
    P = np.zeros((n, n))
    P[:3 * N, :3 * N] = np.kron(np.eye(N), 2.0 * np.frombuffer(Q).reshape(3, 3))
    P[3 * N: 6 * N, 3 * N: 6 * N] = np.kron(np.eye(N), 2.0 * np.frombuffer(R).reshape(3, 3))
    idx = np.arange(6 * N, n)
    P[idx, idx] = 2.0 * rho
    P.setflags(write=False)
    return P


def _assemble(lay: _Layout, cfg: MpcConfig, A_k, B_k, dyn_rhs, col_a, col_l, du_lo, du_hi,
              state_off, input_off):
    """Common QP skeleton.

    ``state_off``/``input_off`` are the fixed parts of the tracking errors, so
    the cost is ``sum (off_x + dX)'Q(off_x + dX) + (off_u + du)'R(off_u + du) + rho |s|^2``.
    ``col_a`` is ``(N, n_obs, 2)`` row coefficients on the position deviation,
    ``col_l`` their lower bounds (``-inf`` drops the row).
    """
    N, n_obs = lay.N, lay.n_obs
    P = _hessian(N, lay.ns, cfg.Q.tobytes(), cfg.R.tobytes(), cfg.rho)
    Q2, R2 = 2.0 * cfg.Q, 2.0 * cfg.R
    q = np.zeros(lay.n)
    q[lay.ix: lay.iu] = (np.asarray(state_off) @ Q2.T).ravel()
    q[lay.iu: lay.isl] = (np.asarray(input_off) @ R2.T).ravel()

    A = np.zeros((lay.m, lay.n))
    l = np.empty(lay.m)
    u = np.empty(lay.m)
    # dynamics rows: dX_{k+1} - A_k dX_k - B_k du_k = rhs_k
    ri = np.arange(3 * N)
    A[ri, lay.ix + ri] = 1.0
    k = np.arange(N)[:, None, None]
    i = np.arange(3)[None, :, None]
    j = np.arange(3)[None, None, :]
    A[3 * k + i, lay.iu + 3 * k + j] = -B_k
    if N > 1:
        A[3 * k[1:] + i, lay.ix + 3 * (k[1:] - 1) + j] = -A_k[1:]
    l[:3 * N] = dyn_rhs.ravel()
    u[:3 * N] = dyn_rhs.ravel()

    if n_obs:
        kk, jj = np.meshgrid(np.arange(N), np.arange(n_obs), indexing="ij")
        rows = lay.r_col + kk * n_obs + jj
        A[rows, lay.ix + 3 * kk] = col_a[..., 0]
        A[rows, lay.ix + 3 * kk + 1] = col_a[..., 1]
        live = np.isfinite(col_l)
        sl = lay.isl + (kk * n_obs + jj if lay.ns != n_obs else jj)
        A[rows[live], sl[live]] = 1.0
        l[lay.r_col: lay.r_inp] = col_l.ravel()
        u[lay.r_col: lay.r_inp] = np.inf

    A[lay.r_inp + ri, lay.iu + ri] = 1.0
    l[lay.r_inp: lay.r_sl] = du_lo.ravel()
    u[lay.r_inp: lay.r_sl] = du_hi.ravel()

    rs = np.arange(lay.ns)
    A[lay.r_sl + rs, lay.isl + rs] = 1.0
    l[lay.r_sl:] = 0.0
    u[lay.r_sl:] = np.inf
    return qp.QpProblem(P, q, A, l, u)


def _heading_error(X: np.ndarray, Xr: np.ndarray) -> np.ndarray:
    e = np.asarray(X, dtype=float) - np.asarray(Xr, dtype=float)
    e[..., 2] = wrap_angles(e[..., 2])
    return e


def build_lmpc(X0, window, obstacles: Sequence[Obstacle], cfg: MpcConfig,
               diagnostics: list | None = None) -> qp.QpProblem:
    """Linearized tracking QP about the reference window ``(X_r, u_r)``.

    Dynamics: ``dX_{k+1} = A_k dX_k + B_k du_k`` with ``dX_0`` the wrapped
    measured error. Keep-out: the disk of radius ``R_obs + robot_radius`` is
    replaced at every step by its tangent half-plane facing the reference point.
    """
    X_r, u_r = (np.asarray(a, dtype=float) for a in window)
    N = len(u_r)
    lay = _Layout(N, len(obstacles), cfg)
    A_k, B_k = jacobians(X_r[:N], u_r, cfg.dt)
    e0 = _heading_error(np.asarray(X0, dtype=float), X_r[0])
    dyn_rhs = np.zeros((N, 3))
    dyn_rhs[0] = A_k[0] @ e0

    c, R = _centers_radii(obstacles, cfg)
    V = X_r[1:, None, :2] - c[None, :, :]  # (N, n_obs, 2)
    nrm = np.hypot(V[..., 0], V[..., 1])
    ok = nrm > 1e-9
    col_a = np.where(ok[..., None], V / np.where(ok, nrm, 1.0)[..., None], 0.0)
    col_l = np.where(ok, R[None, :] - nrm, -np.inf)
    if not ok.all():
        msg = f"dropped {int((~ok).sum())} tangent constraint(s): reference point at obstacle center"
        warnings.warn(msg, ConstraintDropWarning, stacklevel=2)
        if diagnostics is not None:
            diagnostics.append(msg)

    umin, umax = np.asarray(cfg.u_min, dtype=float), np.asarray(cfg.u_max, dtype=float)
    input_off = u_r if cfg.input_cost == "absolute" else np.zeros_like(u_r)
    return _assemble(lay, cfg, A_k, B_k, dyn_rhs, col_a, col_l, umin - u_r, umax - u_r,
                     np.zeros((N, 3)), input_off)


def _objective(cfg: MpcConfig, X, X_r, u, u_r, slacks) -> float:
    e = _heading_error(X, X_r)
    du = u if cfg.input_cost == "absolute" else u - u_r
    return float(np.sum((e @ cfg.Q) * e) + np.sum((du @ cfg.R) * du) + cfg.rho * np.sum(np.square(slacks)))


def _advance(blk: np.ndarray, steps: int) -> np.ndarray:
    """Drop the first ``steps`` rows and pad by repeating the last one."""
    if steps <= 0:
        return blk
    steps = min(steps, len(blk) - 1)
    return np.vstack((blk[steps:], np.repeat(blk[-1:], steps, axis=0)))


def _shift(x: np.ndarray | None, lay: _Layout, steps: int = 1) -> np.ndarray | None:
    """Previous decision vector advanced by ``steps`` horizon steps."""
    if x is None or len(x) != lay.n:
        return None
    out = x.copy()
    for start in (lay.ix, lay.iu):
        blk = x[start: start + 3 * lay.N].reshape(lay.N, 3)
        out[start: start + 3 * lay.N] = _advance(blk, steps).ravel()
    if lay.ns != lay.n_obs:
        out[lay.isl:] = _advance(x[lay.isl:].reshape(lay.N, lay.n_obs), steps).ravel()
    return out


def _shift_dual(y: np.ndarray | None, lay: _Layout, steps: int = 1) -> np.ndarray | None:
    """Multipliers advanced like :func:`_shift`."""
    if y is None or len(y) != lay.m:
        return None
    out = y.copy()
    N = lay.N
    for start, width in ((lay.r_dyn, 3), (lay.r_col, lay.n_obs), (lay.r_inp, 3)):
        blk = y[start: start + width * N].reshape(N, width)
        out[start: start + width * N] = _advance(blk, steps).ravel()
    if lay.ns != lay.n_obs:
        out[lay.r_sl:] = _advance(y[lay.r_sl:].reshape(N, lay.n_obs), steps).ravel()
    return out


def _slacks_view(s: np.ndarray, lay: _Layout, cfg: MpcConfig) -> np.ndarray:
    s = np.maximum(s, 0.0)
    return s.reshape(lay.N, lay.n_obs) if cfg.per_step_slack else s


def solve_lmpc(X0, window, obstacles: Sequence[Obstacle], cfg: MpcConfig,
               warm_start=None, workspace: qp.Workspace | None = None, shift: int = 1) -> MpcSolution:
    """Solve the linear cf-MPC.

    ``warm_start`` is a previous :class:`MpcSolution`, advanced here by
    ``shift`` horizon steps (0 when the loop runs faster than ``cfg.dt``).
    """
    t0 = time.perf_counter()
    X_r, u_r = (np.asarray(a, dtype=float) for a in window)
    N = len(u_r)
    lay = _Layout(N, len(obstacles), cfg)
    diags: list[str] = []
    prob = build_lmpc(X0, (X_r, u_r), obstacles, cfg, diags)
    ws = None
    if isinstance(warm_start, MpcSolution):
        ws = (_shift(warm_start.x, lay, shift), _shift_dual(warm_start.y, lay, shift))
    res = qp.solve(prob, cfg.qp_settings, ws, workspace)
    x = res.x
    dX = x[lay.ix: lay.iu].reshape(N, 3)
    du = x[lay.iu: lay.isl].reshape(N, 3)
    X = X_r[1:] + dX
    X[:, 2] = wrap_angles(X[:, 2])
    u = np.clip(u_r + du, cfg.u_min, cfg.u_max)
    slacks = _slacks_view(x[lay.isl:], lay, cfg)
    status = {qp.SOLVED: SOLVED, qp.MAX_ITERATIONS: DEGRADED}.get(res.status, FAILED)
    return MpcSolution(X, u, slacks, _objective(cfg, X, X_r[1:], u, u_r, slacks),
                       time.perf_counter() - t0, status, res.iterations, 0, res.status, diags, x, res.y)


def solve_nmpc(X0, window, obstacles: Sequence[Obstacle], cfg: MpcConfig,
               warm_start=None, workspace: qp.Workspace | None = None, shift: int = 1) -> MpcSolution:
    """Nonlinear cf-MPC by full-step SQP.

    Each iteration linearizes the exact model and the circular keep-out
    ``|p_k - c_j|^2 + s_j >= R^2`` about the current iterate. The returned
    states are a rollout of the returned inputs; if that rollout violates a
    circle by more than its slack plus ``feasibility_tol`` the result is
    flagged degraded.
    """
    t0 = time.perf_counter()
    X_r, u_r = (np.asarray(a, dtype=float) for a in window)
    N = len(u_r)
    n_obs = len(obstacles)
    lay = _Layout(N, n_obs, cfg)
    X0 = np.asarray(X0, dtype=float)
    c, R = _centers_radii(obstacles, cfg)
    umin, umax = np.asarray(cfg.u_min, dtype=float), np.asarray(cfg.u_max, dtype=float)

    # iterate: inputs, states X_0..X_N (headings kept continuous), slacks
    if isinstance(warm_start, MpcSolution) and warm_start.inputs.shape == (N, 3):
        ubar = _advance(warm_start.inputs, shift)
    else:
        ubar = u_r.copy()
    ubar = np.clip(ubar, umin, umax)
    Xbar = np.empty((N + 1, 3))
    Xbar[0] = X0
    Xbar[1:] = X_r[1:]
    # keep the iterate's headings on the same branch as the measured heading
    Xbar[1:, 2] = X0[2] + np.cumsum(wrap_angles(np.diff(np.concatenate(([X0[2]], X_r[1:, 2])))))
    sbar = np.zeros(lay.ns)

    iters = 0
    qp_iters = 0
    status = FAILED
    res = None
    x_prev = None
    diags: list[str] = []
    for iters in range(1, cfg.sqp_max_iter + 1):
        A_k, B_k = jacobians(Xbar[:N], ubar, cfg.dt)
        f = step_array(Xbar[:N], ubar, cfg.dt)
        dyn_rhs = f - Xbar[1:]
        dyn_rhs[:, 2] = wrap_angles(dyn_rhs[:, 2])
        d = Xbar[1:, None, :2] - c[None, :, :]  # (N, n_obs, 2)
        col_a = 2.0 * d
        col_l = R[None, :] ** 2 - np.einsum("knj,knj->kn", d, d)
        state_off = _heading_error(Xbar[1:], X_r[1:])
        input_off = ubar if cfg.input_cost == "absolute" else ubar - u_r
        prob = _assemble(lay, cfg, A_k, B_k, dyn_rhs, col_a, col_l, umin - ubar, umax - ubar,
                         state_off, input_off)
        # slacks are absolute variables; the rest are steps and start at zero
        ws = np.zeros(lay.n)
        ws[lay.isl:] = sbar
        res = qp.solve(prob, cfg.qp_settings, (ws, None) if x_prev is None else (ws, res.y), workspace)
        x_prev = res.x
        qp_iters += res.iterations
        if res.status == qp.PRIMAL_INFEASIBLE:
            status = FAILED
            break
        dX = res.x[lay.ix: lay.iu].reshape(N, 3)
        du = res.x[lay.iu: lay.isl].reshape(N, 3)
        s_new = np.maximum(res.x[lay.isl:], 0.0)
        step_norm = max(np.max(np.abs(dX)), np.max(np.abs(du)), np.max(np.abs(s_new - sbar), initial=0.0))
        Xbar[1:] += dX
        ubar = np.clip(ubar + du, umin, umax)
        sbar = s_new
        status = SOLVED if res.status == qp.SOLVED else DEGRADED
        if step_norm < cfg.sqp_step_tol:
            break
    else:
        status = DEGRADED
        diags.append("sqp reached max_iter")

    # roll the inputs out through the exact model
    X = np.empty((N + 1, 3))
    X[0] = X0
    for k in range(N):
        X[k + 1] = step_array(X[k], ubar[k], cfg.dt)
    X = X[1:]
    slacks = _slacks_view(sbar, lay, cfg)
    if n_obs and status != FAILED:
        dist2 = np.sum((X[:, None, :2] - c[None]) ** 2, axis=2)  # (N, n_obs)
        s_kj = slacks if cfg.per_step_slack else np.broadcast_to(slacks, (N, n_obs))
        violation = float(np.max(R[None] ** 2 - dist2 - s_kj))
        if violation > cfg.feasibility_tol:
            status = DEGRADED
            diags.append(f"circle constraint violated by {violation:.3g} beyond slack")
    X[:, 2] = wrap_angles(X[:, 2])
    return MpcSolution(X, ubar, slacks, _objective(cfg, X, X_r[1:], ubar, u_r, slacks),
                       time.perf_counter() - t0, status, qp_iters, iters,
                       res.status if res is not None else "", diags,
                       res.x if res is not None else None, res.y if res is not None else None)


@dataclass
class StepLog:
    t: float
    measured: Pose
    command: BodyInput
    objective: float
    slacks: np.ndarray
    solve_time: float
    status: str


@dataclass
class Controller:
    """Receding-horizon tracker with warm-start memory; one per control loop."""

    cfg: MpcConfig = field(default_factory=MpcConfig)
    mode: str = LINEAR
    workspace: qp.Workspace | None = None
    last: MpcSolution | None = None
    degraded: bool = False
    history: list[StepLog] = field(default_factory=list)
    keep_history: bool = False
    _last_t: float = field(default=math.nan, repr=False)
    _last_traj: Trajectory | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in (LINEAR, NONLINEAR):
            raise ValueError(f"mode must be {LINEAR!r} or {NONLINEAR!r}")
        if self.workspace is None:
            self.workspace = qp.Workspace(self.cfg.qp_settings)

    def reset(self) -> None:
        self.last = None
        self.degraded = False
        self._last_t = math.nan
        self._last_traj = None

    def step(self, measured, t: float, traj: Trajectory, obstacles: Sequence[Obstacle]) -> BodyInput:
        cfg = self.cfg
        window = reference_window(traj, t, cfg.N, cfg.dt)
        solver = solve_lmpc if self.mode == LINEAR else solve_nmpc
        warm = self.last
        if warm is not None and warm.slacks.size != cfg.n_slacks(len(obstacles)):
            warm = None
        # the old solution only means something on the same reference, later in time
        elapsed = t - self._last_t
        if traj is not self._last_traj or not elapsed >= 0.0:
            warm = None
        shift = int(round(elapsed / cfg.dt)) if warm is not None else 0
        self._last_t, self._last_traj = t, traj
        try:
            sol = solver(measured, window, obstacles, cfg, warm, self.workspace, shift)
        except (np.linalg.LinAlgError, ValueError) as exc:
            log.warning("cf-MPC solve raised %s; commanding a stop", exc)
            sol = None
        if sol is None or sol.status == FAILED:
            self.degraded = True
            self.last = None
            u = ZERO_INPUT
            if self.keep_history:
                self.history.append(StepLog(t, Pose(*measured), u, math.nan, np.zeros(0), 0.0, FAILED))
            return u
        self.degraded = sol.status != SOLVED
        self.last = sol
        u = sol.command
        if self.keep_history:
            self.history.append(StepLog(t, Pose(*measured), u, sol.objective, sol.slacks,
                                        sol.solve_time, sol.status))
        return u


def track_step(controller: Controller, measured, t: float, traj: Trajectory,
               obstacles: Sequence[Obstacle], cfg: MpcConfig | None = None,
               mode: str | None = None) -> BodyInput:
    """One receding-horizon step: build the window at ``t``, solve, return ``u_0``."""
    if cfg is not None and cfg is not controller.cfg:
        controller.cfg = cfg
        controller.workspace = qp.Workspace(cfg.qp_settings)
        controller.last = None
    if mode is not None and mode != controller.mode:
        controller.mode = mode
        controller.last = None
    return controller.step(measured, t, traj, obstacles)


__all__ = [
    "MpcConfig", "MpcSolution", "Controller", "ConstraintDropWarning", "build_lmpc",
    "solve_lmpc", "solve_nmpc", "track_step", "LINEAR", "NONLINEAR",
]
