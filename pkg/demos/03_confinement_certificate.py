"""
Characteristics never reach the wall
====================================

For a trajectory started at (x, v) the distance to the boundary over a time
window alpha is bounded below by

    [c0 / (1/c0 + 2|v| + C0' + 3 C0 alpha + |psi_ext(x)|)]^(1/gamma).

We trace a few characteristics through the fields of a short run and compare.
"""

from pathlib import Path

import numpy as np

from rvm1d import PhasePoint, confinement_bound, load_config, run_time_marching
from rvm1d.characteristics import trace_trajectory

root = Path(__file__).resolve().parents[1]
cfg = load_config(root / "configs" / "confined_bump.json").replace(nx=32, nv=16, t_final=0.5)
run = run_time_marching(cfg)
fields = run.sampler()

# measured sup norms stand in for the theoretical field bounds
c0 = max(float(np.hypot(fs.e1, fs.e2).max()) for fs in run.field_states)
c0p = max(float(np.abs(fs.b).max()) for fs in run.field_states)

starts = [(0.35, (0.9, 0.0)), (0.5, (-1.0, 0.3)), (0.62, (0.4, -0.8)), (0.2, (-3.0, 0.0))]
print("   x0     |v|    min dist   certified")
for x0, v in starts:
    rows = trace_trajectory(0.0, PhasePoint(x0, *v), fields, cfg.t_final)
    dist = np.minimum(rows[:, 1], 1 - rows[:, 1]).min()
    bound = confinement_bound(x0, v, cfg.t_final, c0, c0p, cfg.potential)
    print(f"{x0:6.2f}  {np.hypot(*v):5.2f}   {dist:.5f}    {bound:.5f}")
