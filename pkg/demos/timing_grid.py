"""
How the cost grows
==================

Time the planner over obstacle count and polygon resolution, and both
trackers over horizon length. Set PITCHPLAN_THREADS to spread the work.
"""
from pitchplan.bench import davg_suite, mpc_suite

print("planner          median ms")
for r in davg_suite(repetitions=20, seed=0):
    print(f"  {r.n_obs} disks, {r.param:2d}-gon   {r.median_ms:7.2f}")

for mode in ("linear", "nonlinear"):
    print(f"{mode} tracker")
    for r in mpc_suite(mode, repetitions=5, seed=0):
        print(f"  N={r.param:2d}   {r.median_ms:6.2f} ms   p95 {r.p95_ms:6.2f}")
