"""Command line entry point: ``pitchplan plan | sim | bench``.

Exit codes: 0 success, 1 malformed input, 2 unplannable. ``sim`` exits 0
only when the goal is reached (3 on timeout or collision).
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import platform
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bench import COLUMNS, SUITES, run_suite
from .davg import plan
from .geometry import GeometryError
from .io import (ScenarioError, load_scenario, override, scenario_to_dict, svg_figure,
                 write_sim_svg, write_waypoints_csv)
from .sim import REACHED, UNPLANNABLE, run
from .visibility import UnplannableError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNPLANNABLE = 2
EXIT_NOT_REACHED = 3

log = logging.getLogger("pitchplan")


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    version: str = __version__
    started: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())
    python: str = platform.python_version()
    numpy: str = np.__version__
    scenario: str | None = None
    out: str | None = None
    seed: int | None = None
    overrides: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    exit_code: int | None = None
    result: dict = field(default_factory=dict)

    def write(self, out: Path) -> None:
        (out / "manifest.json").write_text(json.dumps(asdict(self), indent=2) + "\n")


def _prepare(args, command: str, argv) -> tuple[Path, RunManifest]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    keys = ("seed", "mode", "turn_weight", "n_sides", "horizon", "suite", "repetitions")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return out, RunManifest(command, list(argv), scenario=getattr(args, "scenario", None), out=str(out),
                            seed=getattr(args, "seed", None), overrides=overrides)


def _load(args):
    sc = load_scenario(args.scenario)
    return override(sc, seed=args.seed, mode=getattr(args, "mode", None), turn_weight=args.turn_weight,
                    n_sides=args.n_sides, horizon=getattr(args, "horizon", None))


def _snapshot(out: Path, sc, man: RunManifest) -> None:
    (out / "config.json").write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")
    man.outputs.append("config.json")


def cmd_plan(args, argv) -> int:
    out, man = _prepare(args, "plan", argv)
    try:
        sc = _load(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        man.exit_code = EXIT_INPUT
        man.write(out)
        return EXIT_INPUT
    _snapshot(out, sc, man)
    obstacles = [o.inflated(sc.mpc.robot_radius + sc.plan_margin) for o in sc.obstacles_at(0.0)]
    try:
        res = plan(sc.start, sc.goal, obstacles, sc.planner)
    except (UnplannableError, GeometryError) as exc:
        print(f"unplannable: {exc}", file=sys.stderr)
        man.exit_code = EXIT_UNPLANNABLE
        man.write(out)
        return EXIT_UNPLANNABLE
    write_waypoints_csv(out / "waypoints.csv", res.waypoints)
    res.graph.to_csv(out / "graph_nodes.csv", out / "graph_edges.csv")
    (out / "plan.svg").write_text(svg_figure(sc.field_size, sc.obstacles_at(0.0), [(res.as_array(), "#e02020")],
                                             None, sc.start, sc.goal, sc.planner.n_sides,
                                             sc.planner.phase, sc.mpc.robot_radius + sc.plan_margin))
    man.outputs += ["waypoints.csv", "graph_nodes.csv", "graph_edges.csv", "plan.svg"]
    man.result = {"cost": res.cost, "distance": res.distance, "total_turn": res.total_turn,
                  "solve_ms": res.solve_time * 1e3, "waypoints": len(res.waypoints)}
    man.exit_code = EXIT_OK
    man.write(out)
    print(f"cost {res.cost:.4f}  length {res.distance:.3f} m  turn {res.total_turn:.3f} rad  "
          f"{len(res.waypoints)} waypoints  ({res.solve_time * 1e3:.2f} ms)")
    return EXIT_OK


def cmd_sim(args, argv) -> int:
    out, man = _prepare(args, "sim", argv)
    try:
        sc = _load(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        man.exit_code = EXIT_INPUT
        man.write(out)
        return EXIT_INPUT
    _snapshot(out, sc, man)
    result = run(sc)
    result.to_csv(out / "simlog.csv")
    write_sim_svg(out / "sim.svg", sc, result)
    with open(out / "replans.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "traj_id", "reason", "ok", "plan_ms"])
        for e in result.replans:
            w.writerow([repr(e.t), e.traj_id, e.reason, int(e.ok), e.plan_time * 1e3])
    man.outputs += ["simlog.csv", "sim.svg", "replans.csv"]
    if result.paths:
        last = max(result.paths)
        write_waypoints_csv(out / "waypoints.csv", result.paths[last])
        man.outputs.append("waypoints.csv")
    solve = np.array([r.solve_time for r in result.records]) * 1e3
    man.result = {"outcome": result.outcome, "ticks": len(result.records), "replans": len(result.replans),
                  "fingerprint": result.fingerprint(),
                  "solve_ms_mean": float(solve.mean()) if solve.size else None,
                  "solve_ms_max": float(solve.max()) if solve.size else None}
    code = EXIT_OK if result.outcome == REACHED else (
        EXIT_UNPLANNABLE if result.outcome == UNPLANNABLE else EXIT_NOT_REACHED)
    man.exit_code = code
    man.write(out)
    failed = sum(not e.ok for e in result.replans)
    print(f"{result.outcome} after {len(result.records)} ticks, {len(result.replans) - failed} plans"
          + (f", {failed} failed attempts" if failed else ""))
    return code


def cmd_bench(args, argv) -> int:
    out, man = _prepare(args, "bench", argv)
    rows = []
    for suite in (SUITES if args.suite == "all" else (args.suite,)):
        rows += run_suite(suite, args.repetitions, args.seed or 0)
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow(r.as_list())
    man.outputs.append("bench.csv")
    man.result = {"rows": [r.as_list() for r in rows]}
    man.exit_code = EXIT_OK
    man.write(out)
    print(f"{'suite':6} {'n_obs':>5} {'param':>5} {'mean ms':>9} {'median ms':>9} {'p95 ms':>9}")
    for r in rows:
        print(f"{r.suite:6} {r.n_obs:5d} {r.param:5d} {r.mean_ms:9.3f} {r.median_ms:9.3f} {r.p95_ms:9.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pitchplan", description="Turn-aware planning and tracking on a pitch.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario JSON file")
            sp.add_argument("--lambda", dest="turn_weight", type=float, help="turn weight (m/rad)")
            sp.add_argument("--n-sides", type=int, help="sides of the obstacle polygons")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("plan", help="plan one path from the scenario start")
    common(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("sim", help="closed-loop simulation")
    common(sp)
    sp.add_argument("--mode", choices=("linear", "nonlinear"))
    sp.add_argument("--horizon", type=int, help="prediction horizon in steps")
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("bench", help="timing suites")
    common(sp, scenario=False)
    sp.add_argument("--suite", choices=SUITES + ("all",), default="all")
    sp.add_argument("--repetitions", type=int, default=20)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "horizon", None) is not None and args.horizon < 1:
        print("error: --horizon must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "n_sides", None) is not None and args.n_sides < 3:
        print("error: --n-sides must be >= 3", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "turn_weight", None) is not None and not args.turn_weight >= 0:
        print("error: --lambda must be >= 0", file=sys.stderr)
        return EXIT_INPUT
    return args.func(args, argv)


if __name__ == "__main__":
    raise SystemExit(main())
