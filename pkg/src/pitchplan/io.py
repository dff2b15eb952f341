"""Scenario files, CSV outputs and SVG figures."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .cfmpc import MpcConfig
from .davg import PlannerConfig
from .obstacles import Obstacle, polygonize
from .sim import Scenario, ScenarioObstacle, SimLog


class ScenarioError(ValueError):
    """Malformed scenario input; the message names the offending location."""


def scenario_schema() -> dict:
    return json.loads(resources.files("pitchplan").joinpath("data/scenario.schema.json").read_text())


def _pose(d: dict) -> tuple[float, float, float]:
    return (d["x"], d["y"], d.get("theta", 0.0))


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc, source)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    return parse_scenario(text, str(path))


def scenario_from_dict(doc, source: str = "<dict>") -> Scenario:
    validator = jsonschema.Draft202012Validator(scenario_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path) or "(root)"
        raise ScenarioError(f"{source}: {where}: {e.message}")

    pl = doc.get("planner", {})
    tr = doc.get("tracker", {})
    sm = doc.get("sim", {})
    fld = doc.get("field", {})
    try:
        planner = PlannerConfig(turn_weight=pl.get("turn_weight", 1.0), n_sides=pl.get("n_sides", 18),
                                phase=pl.get("phase", 0.0),
                                use_active_set=pl.get("use_active_set", True))
        mpc_kw = {k: tr[k] for k in ("dt", "rho", "robot_radius", "per_step_slack", "input_cost") if k in tr}
        for k in ("u_min", "u_max"):
            if k in tr:
                mpc_kw[k] = tuple(tr[k])
        for k in ("Q", "R"):
            if k in tr:
                mpc_kw[k] = np.diag(tr[k])
        if "horizon" in tr:
            mpc_kw["N"] = tr["horizon"]
        mpc = MpcConfig(**mpc_kw)
        obstacles = tuple(
            ScenarioObstacle(Obstacle((o["x"], o["y"]), o["radius"], o.get("id", i)),
                             o.get("appear_time", 0.0), tuple(o.get("velocity", (0.0, 0.0))))
            for i, o in enumerate(doc.get("obstacles", [])))
        extra = {k: sm[k] for k in ("max_time", "control_dt", "replan_period", "cross_track_limit",
                                    "realtime", "input_lag") if k in sm}
        for k in ("goal_tolerance", "input_scale"):
            if k in sm:
                extra[k] = tuple(sm[k])
        for k in ("v_nom", "omega_nom"):
            if k in tr:
                extra[k] = tr[k]
        return Scenario(
            start=_pose(doc["start"]), goal=_pose(doc["goal"]), obstacles=obstacles,
            field_size=(fld.get("width", 14.0), fld.get("height", 9.0)),
            noise_std=tuple(doc.get("noise_std", (0.0, 0.0, 0.0))), seed=doc.get("seed", 0),
            planner=planner, mpc=mpc, mode=tr.get("mode", "linear"),
            plan_margin=pl.get("margin", 0.1), **extra)
    except ValueError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


def scenario_to_dict(sc: Scenario) -> dict:
    """Fully resolved scenario, suitable for a config snapshot and round-trips."""
    m = sc.mpc
    return {
        "version": 1,
        "field": {"width": sc.field_size[0], "height": sc.field_size[1]},
        "start": dict(zip("x y theta".split(), sc.start)),
        "goal": dict(zip("x y theta".split(), sc.goal)),
        "obstacles": [
            {"id": so.obstacle.id, "x": so.obstacle.center.x, "y": so.obstacle.center.y,
             "radius": so.obstacle.radius, "appear_time": so.appear_time, "velocity": list(so.velocity)}
            for so in sc.obstacles],
        "seed": sc.seed,
        "noise_std": list(sc.noise_std),
        "planner": {"turn_weight": sc.planner.turn_weight, "n_sides": sc.planner.n_sides,
                    "phase": sc.planner.phase, "margin": sc.plan_margin,
                    "use_active_set": sc.planner.use_active_set},
        "tracker": {"mode": sc.mode, "horizon": m.N, "dt": m.dt, "Q": np.diag(m.Q).tolist(),
                    "R": np.diag(m.R).tolist(), "rho": m.rho, "u_min": list(m.u_min),
                    "u_max": list(m.u_max), "robot_radius": m.robot_radius,
                    "per_step_slack": m.per_step_slack, "input_cost": m.input_cost,
                    "v_nom": sc.v_nom, "omega_nom": sc.omega_nom},
        "sim": {"max_time": sc.max_time, "control_dt": sc.dt, "replan_period": sc.replan_period,
                "cross_track_limit": sc.cross_track_limit, "goal_tolerance": list(sc.goal_tolerance),
                "realtime": sc.realtime, "input_scale": list(sc.input_scale),
                "input_lag": sc.input_lag},
    }


def override(sc: Scenario, *, seed=None, mode=None, turn_weight=None, n_sides=None, horizon=None) -> Scenario:
    """Copy of ``sc`` with command-line style overrides applied."""
    kw = {}
    if seed is not None:
        kw["seed"] = seed
    if mode is not None:
        kw["mode"] = mode
    pl = {}
    if turn_weight is not None:
        pl["turn_weight"] = turn_weight
    if n_sides is not None:
        pl["n_sides"] = n_sides
    if pl:
        kw["planner"] = replace(sc.planner, **pl)
    if horizon is not None:
        kw["mpc"] = replace(sc.mpc, N=horizon)
    return replace(sc, **kw)


def write_waypoints_csv(path, waypoints) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in np.asarray(waypoints, dtype=float).reshape(-1, 2):
            w.writerow([repr(float(x)), repr(float(y))])


def read_waypoints_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)


# --- SVG -------------------------------------------------------------------

_SCALE = 60.0  # pixels per meter


def _pts(xy, h) -> str:
    return " ".join(f"{x * _SCALE:.2f},{(h - y) * _SCALE:.2f}" for x, y in np.asarray(xy).reshape(-1, 2))


def svg_figure(field_size, obstacles=(), paths=(), truth=None, start=None, goal=None,
               n_sides: int | None = None, phase: float = 0.0, inflate: float = 0.0) -> str:
    """Render a top-down view.

    ``paths`` is a sequence of ``(waypoints, color)``. Obstacles are drawn as
    disks, with their inflated polygon outline when ``n_sides`` is given.
    """
    w, h = field_size
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * _SCALE:.0f}" height="{h * _SCALE:.0f}" '
           f'viewBox="0 0 {w * _SCALE:.0f} {h * _SCALE:.0f}">',
           f'<rect x="0" y="0" width="{w * _SCALE:.0f}" height="{h * _SCALE:.0f}" fill="#3a7d44"/>']
    for o in obstacles:
        cx, cy = o.center.x * _SCALE, (h - o.center.y) * _SCALE
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{o.radius * _SCALE:.2f}" fill="#222" opacity="0.8"/>')
        if n_sides:
            poly = polygonize(o.inflated(inflate), n_sides, phase)
            out.append(f'<polygon points="{_pts(poly.vertices, h)}" fill="none" stroke="#ccc" '
                       'stroke-dasharray="4 3"/>')
    for xy, color in paths:
        out.append(f'<polyline points="{_pts(xy, h)}" fill="none" stroke="{color}" stroke-width="3"/>')
    if truth is not None and len(truth):
        out.append(f'<polyline points="{_pts(truth, h)}" fill="none" stroke="#fff" stroke-width="1.5"/>')
    for pose, color in ((start, "#ffd700"), (goal, "#ff4500")):
        if pose is None:
            continue
        x, y, th = pose
        tip = (x + 0.4 * math.cos(th), y + 0.4 * math.sin(th))
        out.append(f'<circle cx="{x * _SCALE:.2f}" cy="{(h - y) * _SCALE:.2f}" r="6" fill="{color}"/>')
        out.append(f'<polyline points="{_pts([(x, y), tip], h)}" stroke="{color}" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_sim_svg(path, sc: Scenario, log: SimLog) -> None:
    """Earlier trajectories in blue, the latest one in red, driven path in white."""
    ids = sorted(log.paths)
    paths = [(log.paths[i], "#1f5fff") for i in ids[:-1]]
    if ids:
        paths.append((log.paths[ids[-1]], "#e02020"))
    t_end = log.records[-1].t if log.records else 0.0
    Path(path).write_text(svg_figure(sc.field_size, sc.obstacles_at(t_end), paths, log.true_path,
                                     sc.start, sc.goal))


__all__ = [
    "ScenarioError", "scenario_schema", "parse_scenario", "load_scenario", "scenario_from_dict",
    "scenario_to_dict", "override", "write_waypoints_csv", "read_waypoints_csv", "svg_figure",
    "write_sim_svg",
]
