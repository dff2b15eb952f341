"""
A defender steps in
===================

Run the closed loop on the bundled scenario where one defender appears three
seconds in. The log shows why each replan happened and the SVG shows the old
route in blue and the new one in red.
"""
from pathlib import Path

import numpy as np

from pitchplan.io import load_scenario, write_sim_svg
from pitchplan.sim import run

here = Path(__file__).resolve().parent
sc = load_scenario(here.parent / "scenarios" / "flash.json")
log = run(sc)

print("outcome:", log.outcome, f"after {log.records[-1].t:.2f} s")
for e in log.replans:
    print(f"  t={e.t:5.2f}  plan {e.traj_id}  {e.reason:9s}  {'ok' if e.ok else 'failed'}")

solve = np.array([r.solve_time for r in log.records]) * 1e3
print(f"MPC solve: mean {solve.mean():.2f} ms, worst {solve.max():.2f} ms")

out = Path("flash_sim.svg")
write_sim_svg(out, sc, log)
print("wrote", out)
