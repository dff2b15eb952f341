"""
Climbing out of a keep-out disk
===============================

The reference passes just outside an obstacle but noise has already pushed
the robot inside the keep-out radius. Only predicted states are constrained,
so the tracker may plan its way out from there; the slacks stay available for
when the way out takes longer than one step.
"""
import math

import numpy as np

from pitchplan import Controller, MpcConfig, Obstacle, Pose, interpolate, step

cfg = MpcConfig()
disk = Obstacle((0.0, 0.0), 0.5)
R = disk.radius + cfg.robot_radius

# reference runs along +x, 0.1 m above the keep-out circle
traj = interpolate([(-1.0, R + 0.1), (4.0, R + 0.1)], 0.0, dt=cfg.dt)

for mode in ("linear", "nonlinear"):
    ctl = Controller(cfg, mode)
    X = Pose(0.0, 0.8 * R, 0.0)
    print(f"{mode}: keep-out radius {R:.2f} m")
    for k in range(10):
        u = ctl.step(X, 1.0 / 1.5 + k * cfg.dt, traj, [disk])
        slack = float(np.max(ctl.last.slacks, initial=0.0))
        print(f"  t={k * cfg.dt:4.2f}  distance {math.hypot(X.x, X.y):5.3f}  max slack {slack:6.4f}")
        X = step(X, u, cfg.dt)
