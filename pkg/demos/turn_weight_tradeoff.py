"""
Length against turning
======================

Sweep the turn weight on a field that offers a weaving route and a smoother
one around the outside. Past a modest weight the planner gives up a little
distance to save almost a radian of turning.
"""
import numpy as np

from pitchplan import Obstacle, PlannerConfig, plan

start = (1.0, 4.5, 0.0)
goal = (13.0, 4.5, 0.0)
field = [Obstacle((9.7, 4.1), 1.0), Obstacle((8.0, 5.3), 0.7),
         Obstacle((5.5, 4.1), 1.0), Obstacle((4.6, 6.5), 0.9)]

print(" lambda   length   turning     cost   waypoints")
for lam in np.linspace(0.0, 0.5, 11):
    r = plan(start, goal, field, PlannerConfig(turn_weight=float(lam), n_sides=18))
    print(f"{lam:7.2f}  {r.distance:7.3f}  {r.total_turn:8.3f}  {r.cost:7.3f}   {len(r.waypoints)}")
