"""Dense convex QP solver based on operator splitting (ADMM).

Solves::

    minimize    1/2 x'Px + q'x
    subject to  l <= Ax <= u

The iteration is the OSQP splitting: a linear solve against the cached matrix
``P + sigma I + A' diag(rho) A``, a projection onto the box ``[l, u]``, and a
dual update, with over-relaxation ``alpha``. Rows with ``l == u`` get a larger
penalty, free rows a tiny one. Once the residuals are moderately small the
solver guesses the active set from the duals and polishes by solving the
reduced KKT system directly; the polished point is accepted only if it meets
the same termination tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

SOLVED = "solved"
MAX_ITERATIONS = "max_iterations"
PRIMAL_INFEASIBLE = "primal_infeasible"

INF = 1e20
RHO_MIN = 1e-6
RHO_MAX = 1e6
RHO_EQ_SCALE = 1e3


@dataclass(frozen=True)
class QpSettings:
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    max_iter: int = 4000
    rho: float = 0.1
    alpha: float = 1.6
    sigma: float = 1e-6
    eps_pinf: float = 1e-5
    check_every: int = 5
    adaptive_rho: bool = True
    adaptive_rho_tolerance: float = 5.0
    adaptive_rho_interval: int = 25  # iterations before the first rho update
    adaptive_rho_growth: float = 2.0  # k-th wait is interval * (1 + k) ** growth
    polish: bool = True
    polish_delta: float = 1e-9
    polish_refine: int = 3


@dataclass
class QpProblem:
    P: np.ndarray
    q: np.ndarray
    A: np.ndarray
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        self.q = np.asarray(self.q, dtype=float).ravel()
        n = len(self.q)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.l = np.maximum(np.asarray(self.l, dtype=float).ravel(), -INF)
        self.u = np.minimum(np.asarray(self.u, dtype=float).ravel(), INF)
        m = len(self.A)
        if self.P.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}, got {self.P.shape}")
        if self.l.shape != (m,) or self.u.shape != (m,):
            raise ValueError("l and u must have one entry per row of A")
        if np.any(self.l > self.u):
            raise ValueError("infeasible bounds: l > u")
        if np.max(np.abs(self.P - self.P.T), initial=0.0) > 1e-9:
            raise ValueError("P is not symmetric")

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def m(self) -> int:
        return len(self.l)

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    y: np.ndarray
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float = math.nan
    polished: bool = False
    rho_updates: int = 0

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


@dataclass
class Workspace:
    """Reusable solver state: recent factorizations and the last adapted rho.

    One workspace belongs to one caller at a time. Successive solves of
    problems with the same matrices start from the rho the previous solve
    settled on, so a warm-started MPC loop rarely refactors.
    """

    settings: QpSettings = field(default_factory=QpSettings)
    cache_size: int = 4
    rho: float | None = None
    factorizations: int = 0
    _mats: tuple | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def _same_matrices(self, P, A) -> bool:
        return (self._mats is not None and self._mats[0].shape == P.shape and self._mats[1].shape == A.shape
                and np.array_equal(self._mats[0], P) and np.array_equal(self._mats[1], A))

    def start_rho(self, P, A, default: float) -> float:
        return self.rho if self.rho is not None and self._same_matrices(P, A) else default

    def kinv(self, P, A, rho_vec):
        if not self._same_matrices(P, A):
            self._mats = (P.copy(), A.copy())
            self._cache.clear()
        key = rho_vec.tobytes()
        hit = self._cache.pop(key, None)
        if hit is None:
            n = P.shape[0]
            K = P + self.settings.sigma * np.eye(n) + (A.T * rho_vec) @ A
            cf = sla.cho_factor(K, check_finite=False)
            hit = sla.cho_solve(cf, np.eye(n), check_finite=False)
            self.factorizations += 1
            while len(self._cache) >= self.cache_size:
                self._cache.pop(next(iter(self._cache)))
        self._cache[key] = hit  # most recent last
        return hit


def _rho_vector(l, u, rho):
    r = np.full(len(l), rho)
    r[(l <= -INF) & (u >= INF)] = RHO_MIN
    r[np.abs(u - l) <= 1e-12] = rho * RHO_EQ_SCALE
    return r


def _inf_norm(v: np.ndarray) -> float:
    return float(np.abs(v).max()) if v.size else 0.0


def _residuals(p: QpProblem, x, z, y, s: QpSettings):
    Ax = p.A @ x
    Px = p.P @ x
    Aty = p.A.T @ y
    r_prim = _inf_norm(Ax - z)
    r_dual = _inf_norm(Px + p.q + Aty)
    n_prim = max(_inf_norm(Ax), _inf_norm(z))
    n_dual = max(_inf_norm(Px), _inf_norm(Aty), _inf_norm(p.q))
    eps_prim = s.eps_abs + s.eps_rel * n_prim
    eps_dual = s.eps_abs + s.eps_rel * n_dual
    return r_prim, r_dual, eps_prim, eps_dual, n_prim, n_dual


def _primal_infeasible(p: QpProblem, dy, eps):
    norm = np.max(np.abs(dy), initial=0.0)
    if norm <= 1e-30:
        return False
    if np.max(np.abs(p.A.T @ dy)) > eps * norm:
        return False
    up = np.where(p.u >= INF, 0.0, p.u)
    lo = np.where(p.l <= -INF, 0.0, p.l)
    # an infinite bound paired with a dual of the matching sign voids the certificate
    if np.any((p.u >= INF) & (dy > eps * norm)) or np.any((p.l <= -INF) & (dy < -eps * norm)):
        return False
    return up @ np.maximum(dy, 0.0) + lo @ np.minimum(dy, 0.0) < -eps * norm


def _polish(p: QpProblem, x, z, y, s: QpSettings):
    """Solve the equality-constrained problem on the active set guessed from ``(z, y)``."""
    lower = (z - p.l < -y) & (p.l > -INF)
    upper = (p.u - z < y) & (p.u < INF)
    eq = np.abs(p.u - p.l) <= 1e-12
    lower |= eq
    upper &= ~eq
    act = lower | upper
    Aa = p.A[act]
    ba = np.where(lower[act], p.l[act], p.u[act])
    n, k = p.n, int(act.sum())
    d = s.polish_delta
    K = np.zeros((n + k, n + k))
    K[:n, :n] = p.P
    K[:n, n:] = Aa.T
    K[n:, :n] = Aa
    Kd = K.copy()
    Kd[:n, :n] += d * np.eye(n)
    Kd[n:, n:] -= d * np.eye(k)
    rhs = np.concatenate((-p.q, ba))
    try:
        lu = sla.lu_factor(Kd, check_finite=False)
    except (ValueError, np.linalg.LinAlgError):
        return None
    sol = sla.lu_solve(lu, rhs, check_finite=False)
    for _ in range(s.polish_refine):
        sol = sol + sla.lu_solve(lu, rhs - K @ sol, check_finite=False)
    if not np.all(np.isfinite(sol)):
        return None
    xp = sol[:n]
    yp = np.zeros(p.m)
    yp[act] = sol[n:]
    zp = np.clip(p.A @ xp, p.l, p.u)
    return xp, zp, yp


def solve(p: QpProblem, settings: QpSettings | None = None, warm_start=None,
          workspace: Workspace | None = None) -> QpSolution:
    """Solve ``p``; ``warm_start`` is ``x`` or ``(x, y)``. Cold start is all zeros."""
    if workspace is None:
        workspace = Workspace(settings or QpSettings())
    s = settings or workspace.settings
    if workspace.settings is not s:
        workspace.settings = s
    n, m = p.n, p.m
    P, q, A, l, u = p.P, p.q, p.A, p.l, p.u

    x = np.zeros(n)
    y = np.zeros(m)
    if warm_start is not None:
        if isinstance(warm_start, tuple):
            wx, wy = warm_start
            if wy is not None and np.shape(wy) == (m,):
                y = np.asarray(wy, dtype=float).copy()
        else:
            wx = warm_start
        if wx is not None and np.shape(wx) == (n,):
            x = np.asarray(wx, dtype=float).copy()
    z = np.clip(A @ x, l, u)

    rho = workspace.start_rho(P, A, s.rho)
    rho_vec = _rho_vector(l, u, rho)
    rho_changed_at = 0
    kinv = workspace.kinv(P, A, rho_vec)
    sigma, alpha = s.sigma, s.alpha
    rho_updates = 0
    polish_tried_at = -s.max_iter
    status = MAX_ITERATIONS
    it = 0
    res = _residuals(p, x, z, y, s)
    y_prev = y.copy()

    for it in range(1, s.max_iter + 1):
        y_prev[:] = y
        xt = kinv @ (sigma * x - q + A.T @ (rho_vec * z - y))
        zt = A @ xt
        x = alpha * xt + (1.0 - alpha) * x
        zr = alpha * zt + (1.0 - alpha) * z
        z_new = np.clip(zr + y / rho_vec, l, u)
        y = y + rho_vec * (zr - z_new)
        z = z_new

        if it % s.check_every and it != s.max_iter:
            continue
        res = r_prim, r_dual, eps_prim, eps_dual, n_prim, n_dual = _residuals(p, x, z, y, s)
        if r_prim <= eps_prim and r_dual <= eps_dual:
            status = SOLVED
            break
        if _primal_infeasible(p, y - y_prev, s.eps_pinf):
            status = PRIMAL_INFEASIBLE
            break
        if s.polish and it - polish_tried_at >= 5 * s.check_every and \
                r_prim <= 1e3 * eps_prim and r_dual <= 1e3 * eps_dual:
            polish_tried_at = it
            pol = _polish(p, x, z, y, s)
            if pol is not None:
                pres = _residuals(p, *pol, s)
                if pres[0] <= pres[2] and pres[1] <= pres[3] and _dual_sign_ok(p, pol[1], pol[2], s):
                    x, z, y = pol
                    res = pres
                    workspace.rho = rho
                    return _finish(p, x, y, SOLVED, it, res, True, rho_updates)
        # the wait grows with every update so a flip-flopping rho settles down
        if s.adaptive_rho and it - rho_changed_at >= s.adaptive_rho_interval * (1 + rho_updates) ** s.adaptive_rho_growth:
            ratio = math.sqrt((r_prim / (n_prim + 1e-30)) / (r_dual / (n_dual + 1e-30) + 1e-30) + 1e-30)
            new_rho = min(max(rho * ratio, RHO_MIN), RHO_MAX)
            if new_rho > rho * s.adaptive_rho_tolerance or new_rho < rho / s.adaptive_rho_tolerance:
                rho = new_rho
                rho_vec = _rho_vector(l, u, rho)
                kinv = workspace.kinv(P, A, rho_vec)
                rho_updates += 1
                rho_changed_at = it

    if status == SOLVED and s.polish:
        pol = _polish(p, x, z, y, s)
        if pol is not None:
            pres = _residuals(p, *pol, s)
            if pres[0] <= res[0] + 1e-12 and pres[1] <= res[1] + 1e-12 and _dual_sign_ok(p, pol[1], pol[2], s):
                workspace.rho = rho
                return _finish(p, pol[0], pol[2], SOLVED, it, pres, True, rho_updates)
    workspace.rho = rho
    return _finish(p, x, y, status, it, res, False, rho_updates)


def _dual_sign_ok(p: QpProblem, z, y, s: QpSettings) -> bool:
    # y > 0 only on rows at their upper bound, y < 0 only at the lower bound
    tol = 10 * s.eps_abs
    gap_u = np.where(p.u >= INF, np.inf, p.u - z)
    gap_l = np.where(p.l <= -INF, np.inf, z - p.l)
    bad_u = (y > tol) & (gap_u > 10 * s.eps_abs * (1 + np.abs(z)))
    bad_l = (y < -tol) & (gap_l > 10 * s.eps_abs * (1 + np.abs(z)))
    return not (bad_u.any() or bad_l.any())


def _finish(p, x, y, status, it, res, polished, rho_updates):
    return QpSolution(x, y, status, it, float(res[0]), float(res[1]), p.objective(x), polished, rho_updates)


def kkt_residuals(p: QpProblem, x: np.ndarray, y: np.ndarray) -> dict[str, float]:
    """Stationarity, primal violation and complementarity of a primal-dual pair."""
    Ax = p.A @ x
    stat = np.max(np.abs(p.P @ x + p.q + p.A.T @ y), initial=0.0)
    viol = np.max(np.maximum(p.l - Ax, 0.0) + np.maximum(Ax - p.u, 0.0), initial=0.0)
    yp = np.maximum(y, 0.0)
    ym = np.minimum(y, 0.0)
    gap_u = np.where(p.u >= INF, 0.0, p.u - Ax)
    gap_l = np.where(p.l <= -INF, 0.0, Ax - p.l)
    comp = np.max(np.abs(yp * gap_u) + np.abs(ym * gap_l), initial=0.0)
    # a dual attached to an infinite bound can never be complementary
    comp = max(comp, np.max(np.where(p.u >= INF, yp, 0.0), initial=0.0),
               np.max(np.where(p.l <= -INF, -ym, 0.0), initial=0.0))
    return {"stationarity": float(stat), "primal": float(viol), "complementarity": float(comp)}
