"""
A plasma bump held by the confining potential
=============================================

The external potential psi_ext = c0 / (x (1 - x)) blows up at both walls,
so every characteristic stays inside (0, 1).  The run checks the a-priori
bounds at every step and tracks charge and energy.
"""

from pathlib import Path

from rvm1d import load_config, run_time_marching, theoretical_constants
from rvm1d.diagnostics import check_energy_balance

root = Path(__file__).resolve().parents[1]
cfg = load_config(root / "configs" / "confined_bump.json").replace(nx=32, nv=16, t_final=0.5)

const = theoretical_constants(cfg)
print("field constant C1      ", round(const.C1, 6))
print("support growth C2      ", round(const.C2, 6))
print("wall distance theta0   ", f"{const.theta0:.3e}")
print("velocity radius R      ", round(const.R, 3))

run = run_time_marching(cfg)
l1 = cfg.initial_data.f0.l1_norm()

print()
print("    t      charge error   energy defect   |E1|max   p_radius  sigma")
for n in range(0, run.n_steps + 1, 4):
    rep = run.diagnostics[n]
    drift = (rep.total_charge - l1) / l1
    lo, hi = rep.sigma
    print(f"{rep.t:7.4f}  {drift:+.3e}    {check_energy_balance(run, n):.3e}    "
          f"{rep.e1_max:.5f}  {rep.p_radius:.3f}    [{lo:.3f}, {hi:.3f}]")

# every bound held
print()
print("violations:", run.violations or "none")
