"""
Planning through a crowded pitch
================================

Plan a route across the bundled six-defender scenario, once with the turn
penalty switched off and once with it on, and draw both into one SVG.
"""
from dataclasses import replace
from pathlib import Path

from pitchplan import plan
from pitchplan.io import load_scenario, svg_figure

here = Path(__file__).resolve().parent
sc = load_scenario(here.parent / "scenarios" / "six_defenders.json")

# the planner sees every disk grown by the robot radius plus a margin
grow = sc.mpc.robot_radius + sc.plan_margin
obstacles = [o.inflated(grow) for o in sc.obstacles_at(0.0)]

shortest = plan(sc.start, sc.goal, obstacles, replace(sc.planner, turn_weight=0.0))
smooth = plan(sc.start, sc.goal, obstacles, sc.planner)

for name, r in (("lambda=0", shortest), (f"lambda={sc.planner.turn_weight:g}", smooth)):
    print(f"{name:10s} length {r.distance:6.3f} m   turning {r.total_turn:5.3f} rad   "
          f"{len(r.waypoints)} waypoints   {r.solve_time * 1e3:.1f} ms")

svg = svg_figure(sc.field_size, sc.obstacles_at(0.0),
                 [(shortest.as_array(), "#1f5fff"), (smooth.as_array(), "#e02020")],
                 start=sc.start, goal=sc.goal, n_sides=sc.planner.n_sides, inflate=grow)
out = Path("six_defenders_plan.svg")
out.write_text(svg)
print("wrote", out)
