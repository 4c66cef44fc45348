"""Conserved quantities and a-priori bounds, evaluated on simulation output.

Each check compares a measured quantity against the bound that holds for the
exact solution; a small discretization allowance is added where the bound
is not preserved exactly by the scheme.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PhaseSpaceGrid, SimConfig, dist_to_boundary, sup_data_norms
from .fields import FieldState, SliceArchive, _segment_integral, retarded_times

__all__ = [
    "TheoreticalConstants",
    "DiagnosticsReport",
    "constants_from_norms",
    "theoretical_constants",
    "energy_density",
    "total_energy",
    "boundary_flux",
    "accumulated_flux",
    "check_energy_balance",
    "check_cone_estimate",
    "check_all",
    "evaluate_step",
    "energy_identity_residual",
    "x_support_bound",
]

REL_SLACK = 1e-8


@dataclass(frozen=True)
class TheoreticalConstants:
    C1: float
    C2: float
    C0: float
    theta0: float
    theta1: float
    R: float
    f0_l1: float = 0.0
    f0_sup: float = 0.0
    f0_energy: float = 0.0
    k0: float = 0.0
    t_final: float = 0.0
    psi_sup_eps0: float = 0.0

    @property
    def e1_bound(self) -> float:
        return self.C0 - self.C1

    def v_support_bound(self, t: float) -> float:
        return self.k0 + self.C2 * t

    @property
    def rho_j_bound(self) -> float:
        return self.f0_sup * self.R ** 2

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}


def constants_from_norms(*, f0_l1: float, f0_energy: float, lam: float, e2_0: float = 0.0,
                         b_0: float = 0.0, e2_b: float = 0.0, b_b: float = 0.0,
                         e2b_b: float = 0.0, t_final: float, k0: float, f0_sup: float = 0.0,
                         c0: float | None = None, gamma: float = 1.0,
                         psi_sup=None, eps0: float = 0.25) -> TheoreticalConstants:
    """Field, support and confinement constants from the data norms.

    ``psi_sup(a, b)`` returns sup |psi_ext| on [a, b]; ``c0=None`` means no
    confining field, in which case theta0 = theta1 = 0.
    """
    # |lambda| keeps the E1 bound valid for negative lambda
    m = f0_l1 + abs(lam)
    C1 = (e2_0 + e2_b + b_0 + b_b
          + 0.25 * (m ** 2 + e2_0 ** 2 + b_0 ** 2 + 4.0 * t_final * e2b_b)
          + 0.5 * f0_energy)
    C0 = m + C1
    C2 = 4.0 * C0
    R = k0 + C2 * t_final
    theta0 = theta1 = 0.0
    psi_eps = 0.0
    if c0 is not None:
        psi_eps = float(psi_sup(eps0, 1.0 - eps0))
        base = 1.0 / c0 + 2.0 * k0 + C1 + 3.0 * C2 * t_final
        theta0 = (c0 / (base + psi_eps)) ** (1.0 / gamma)
        theta1 = (c0 / (base + float(psi_sup(theta0, 1.0 - theta0)))) ** (1.0 / gamma)
    return TheoreticalConstants(C1=C1, C2=C2, C0=C0, theta0=theta0, theta1=theta1, R=R,
                                f0_l1=f0_l1, f0_sup=f0_sup, f0_energy=f0_energy, k0=k0,
                                t_final=t_final, psi_sup_eps0=psi_eps)


def theoretical_constants(cfg: SimConfig) -> TheoreticalConstants:
    init = cfg.initial_data
    norms = sup_data_norms(cfg)
    pot = cfg.potential
    return constants_from_norms(
        f0_l1=init.f0.l1_norm(), f0_energy=init.f0.energy_norm(), f0_sup=init.f0.sup(),
        lam=cfg.lam, e2_0=norms["E2_0"], b_0=norms["B_0"], e2_b=norms["E2_b"],
        b_b=norms["B_b"], e2b_b=norms["E2B_b"], t_final=cfg.t_final, k0=init.k0,
        c0=None if pot.form == "none" else pot.c0, gamma=pot.gamma, psi_sup=pot.sup_psi,
        eps0=init.eps0,
    )


def x_support_bound(cfg: SimConfig, const: TheoreticalConstants, t: float) -> float:
    """Lower bound on dist(Sigma(t), boundary) from the support lemma (0 without confinement)."""
    pot = cfg.potential
    if pot.form == "none":
        return 0.0
    denom = (1.0 / pot.c0 + 2.0 * const.k0 + const.C1 + 3.0 * const.C2 * t
             + const.psi_sup_eps0)
    return (pot.c0 / denom) ** (1.0 / pot.gamma)


# ----------------------------------------------------------------------------
# energy

def energy_density(field_state: FieldState, kin, grid: PhaseSpaceGrid | None = None):
    """(e, m): energy density and the flux with d_t e = d_x m.

    ``kin`` is a KineticMoments, or a DistributionState together with ``grid``.
    """
    if not hasattr(kin, "kinetic"):
        from .vlasov import kinetic_moments

        kin = kinetic_moments(kin, grid)
    e2, b = field_state.e2, field_state.b
    e = 0.5 * (field_state.e1 ** 2 + e2 ** 2 + b ** 2) + kin.kinetic
    m = -kin.p1 - e2 * b
    return e, m


def _trapz(y: np.ndarray, dx: float) -> float:
    return float(dx * (y.sum() - 0.5 * (y[0] + y[-1])))


def total_energy(field_state: FieldState, kin) -> float:
    e, _ = energy_density(field_state, kin)
    return _trapz(e, 1.0 / (e.size - 1))


def boundary_flux(field_state: FieldState) -> float:
    """(E2 B)(t, 0) - (E2 B)(t, 1), the Poynting inflow through both ends."""
    e2, b = field_state.e2, field_state.b
    return float(e2[0] * b[0] - e2[-1] * b[-1])


def accumulated_flux(flux: np.ndarray, dt: float) -> float:
    """Trapezoid in time of a per-step boundary inflow series."""
    flux = np.asarray(flux, dtype=float)
    if flux.size < 2:
        return 0.0
    return float(dt * (flux.sum() - 0.5 * (flux[0] + flux[-1])))


def check_energy_balance(run, t_index: int) -> float:
    """Relative defect of int e(t) = int e(0) + int_0^t boundary inflow."""
    fs = run.field_states
    kin = run.kinetic_history
    inflow = run.flux_accum(t_index)
    lhs = total_energy(fs[t_index], kin[t_index])
    rhs = total_energy(fs[0], kin[0]) + inflow
    return abs(lhs - rhs) / max(1.0, abs(rhs))


def energy_identity_residual(run, n: int) -> float:
    """Max over interior nodes of |(e^{n+1} - e^n)/dt - central difference of m^n|."""
    e0, m0 = energy_density(run.field_states[n], run.kinetic_history[n])
    e1, _ = energy_density(run.field_states[n + 1], run.kinetic_history[n + 1])
    dt = run.cfg.dt
    res = (e1[1:-1] - e0[1:-1]) / dt - (m0[2:] - m0[:-2]) / (2.0 * dt)
    return float(np.max(np.abs(res)))


def check_cone_estimate(run, t_index: int, x: float) -> tuple[float, float]:
    """Both sides of the light-cone estimate at (t, x), 0 < x <= 1/2."""
    cfg = run.cfg
    dt = cfg.dt
    t = t_index * dt
    t_plus, t_minus = retarded_times(t, x)
    kin = run.kinetic_history[: t_index + 1]
    arch = SliceArchive(0.0, dt, np.stack([k.abs_j2 for k in kin]), cfg.dx)
    lhs = (_segment_integral(arch, t_plus, t, lambda tau: x - t + tau, dt)
           + _segment_integral(arch, t_minus, t, lambda tau: x + t - tau, dt))
    times = dt * np.arange(t_index + 1)
    energies = np.array([total_energy(run.field_states[n], kin[n]) for n in range(t_index + 1)])
    e_at = float(np.interp(t_minus, times, energies))
    left = np.array([fs.e2[0] * fs.b[0] for fs in run.field_states[: t_index + 1]])
    knots = np.concatenate(([t_minus], times[(times > t_minus) & (times < t_plus)], [t_plus]))
    vals = np.interp(knots, times, left)
    flux = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(knots)))
    return lhs, e_at + flux


# ----------------------------------------------------------------------------
# per-step report

@dataclass
class DiagnosticsReport:
    t: float
    total_charge: float
    total_energy: float
    boundary_flux_accum: float
    max_f: float
    min_f: float
    e1_max: float
    e2_max: float
    b_max: float
    rho_max: float
    j_max: float
    p_radius: float
    sigma: tuple[float, float] | None
    violations: list[tuple[str, float]] = field(default_factory=list)
    margins: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def evaluate_step(cfg: SimConfig, grid: PhaseSpaceGrid, const: TheoreticalConstants,
                  f_values: np.ndarray, fstate: FieldState, current, kin,
                  flux_accum: float, f0_grid_max: float, support_tol: float) -> DiagnosticsReport:
    """Measure one time level and test every bound; margins are bound - measured."""
    from .vlasov import support_extents

    t = fstate.t
    dx, dv = grid.dx, grid.dv
    al = cfg.allowance
    charge = _trapz(current.rho, dx)
    energy = total_energy(fstate, kin)
    sigma, radius = support_extents(f_values, grid, support_tol)
    rep = DiagnosticsReport(
        t=t, total_charge=charge, total_energy=energy, boundary_flux_accum=flux_accum,
        max_f=float(f_values.max()), min_f=float(f_values.min()),
        e1_max=float(np.abs(fstate.e1).max()), e2_max=float(np.abs(fstate.e2).max()),
        b_max=float(np.abs(fstate.b).max()), rho_max=float(np.abs(current.rho).max()),
        j_max=float(max(np.abs(current.j1).max(), np.abs(current.j2).max())),
        p_radius=radius, sigma=sigma,
    )
    charge_allow = al.charge_c * (dx ** 2 + dv ** 2) * const.f0_l1
    checks = {
        "E1_bound": (const.e1_bound * (1 + REL_SLACK) + charge_allow) - rep.e1_max,
        "E2_bound": (const.C1 * (1 + REL_SLACK) + al.field_c * dx ** 2) - rep.e2_max,
        "B_bound": (const.C1 * (1 + REL_SLACK) + al.field_c * dx ** 2) - rep.b_max,
        "charge": (REL_SLACK * const.f0_l1 + charge_allow) - abs(charge - const.f0_l1),
        "f_max": f0_grid_max - rep.max_f,
        "f_nonneg": rep.min_f,
        "v_support": (const.v_support_bound(t) + al.support_cells * dv) - radius,
        "rho_j_bound": const.rho_j_bound * (1 + REL_SLACK) - max(rep.rho_max, rep.j_max),
    }
    if sigma is not None and cfg.potential.form != "none":
        d = min(dist_to_boundary(sigma[0]), dist_to_boundary(sigma[1]))
        checks["x_support"] = d + al.support_cells * dx - x_support_bound(cfg, const, t)
    rep.margins = checks
    rep.violations = [(name, float(m)) for name, m in checks.items() if m < 0.0]
    return rep


def check_all(run, t_index: int) -> DiagnosticsReport:
    """Recompute the report for a stored time level (needs the f snapshot there)."""
    f = run.f_at(t_index)
    if f is None:
        raise KeyError(f"no distribution snapshot stored for step {t_index}")
    return evaluate_step(run.cfg, run.grid, run.constants, f.values, run.field_states[t_index],
                         run.current_history[t_index], run.kinetic_history[t_index],
                         run.flux_accum(t_index), run.f0_grid_max, run.support_tol)
