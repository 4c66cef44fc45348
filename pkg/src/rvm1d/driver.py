"""Coupled evolution: predictor-corrector time marching and the Picard iteration."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .characteristics import ConfinementError, FieldSampler, PhasePoint, n_substeps, trace
from .core import PhaseSpaceGrid, SimConfig, validate_config
from .diagnostics import (
    DiagnosticsReport,
    TheoreticalConstants,
    accumulated_flux,
    boundary_flux,
    evaluate_step,
    theoretical_constants,
)
from .fields import (
    CurrentSlice,
    FieldState,
    SliceArchive,
    compute_e1,
    initial_field_state,
    solve_e2_b_direct,
    step_fields,
)
from .vlasov import (
    FLUSH_RELATIVE,
    DistributionState,
    KineticMoments,
    advance_f,
    initial_distribution,
    kinetic_moments,
    moments,
)

__all__ = [
    "SimulationRun",
    "PicardState",
    "BoundViolation",
    "PicardDivergence",
    "run_time_marching",
    "picard_initial",
    "picard_iterate_once",
    "run_picard",
    "run",
]

log = logging.getLogger(__name__)


class BoundViolation(RuntimeError):
    def __init__(self, step: int, report: DiagnosticsReport):
        names = ", ".join(f"{n} (margin {m:.3g})" for n, m in report.violations)
        super().__init__(f"bound violated at step {step}, t={report.t:.6g}: {names}")
        self.step = step
        self.report = report


class PicardDivergence(RuntimeError):
    def __init__(self, residuals):
        super().__init__(f"Picard iteration did not converge; residuals {list(residuals)}")
        self.residuals = list(residuals)


@dataclass
class SimulationRun:
    cfg: SimConfig
    grid: PhaseSpaceGrid
    constants: TheoreticalConstants
    f_states: dict[int, DistributionState] = field(default_factory=dict)
    field_states: list[FieldState] = field(default_factory=list)
    current_history: list[CurrentSlice] = field(default_factory=list)
    kinetic_history: list[KineticMoments] = field(default_factory=list)
    diagnostics: list[DiagnosticsReport] = field(default_factory=list)
    f0_grid_max: float = 0.0
    support_tol: float = 0.0
    residuals: list[float] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.field_states) - 1

    def f_at(self, step: int) -> DistributionState | None:
        return self.f_states.get(step)

    def flux_accum(self, step: int) -> float:
        """int_0^t [(E2 B)(0) - (E2 B)(1)] by the trapezoid rule over steps."""
        flux = [boundary_flux(fs) for fs in self.field_states[: step + 1]]
        return accumulated_flux(flux, self.cfg.dt)

    @property
    def final_f(self) -> DistributionState:
        return self.f_states[max(self.f_states)]

    def sampler(self, upto: int | None = None) -> FieldSampler:
        states = self.field_states if upto is None else self.field_states[: upto + 1]
        return FieldSampler.from_states(states, self.cfg.potential)

    @property
    def violations(self) -> list[tuple[int, str, float]]:
        return [(n, name, m) for n, rep in enumerate(self.diagnostics)
                for name, m in rep.violations]


def _new_run(cfg: SimConfig) -> tuple[SimulationRun, DistributionState]:
    grid = PhaseSpaceGrid.from_config(cfg)
    const = theoretical_constants(cfg)
    f = initial_distribution(cfg, grid)
    fmax = float(f.values.max())
    tol = cfg.allowance.support_tol_c * grid.dv ** 2 * fmax
    run = SimulationRun(cfg=cfg, grid=grid, constants=const, f0_grid_max=fmax, support_tol=tol)
    return run, f


def _record(run: SimulationRun, step: int, f: DistributionState, fstate: FieldState,
            cur: CurrentSlice, kin: KineticMoments, flux_accum: float, keep_f: bool,
            abort: bool) -> None:
    run.field_states.append(fstate)
    run.current_history.append(cur)
    run.kinetic_history.append(kin)
    if keep_f:
        run.f_states[step] = f
    rep = evaluate_step(run.cfg, run.grid, run.constants, f.values, fstate, cur, kin,
                        flux_accum, run.f0_grid_max, run.support_tol)
    run.diagnostics.append(rep)
    if abort and rep.violations:
        raise BoundViolation(step, rep)


def run_time_marching(cfg: SimConfig, snapshot_stride: int | None = None,
                      abort_on_violation: bool = False, progress=None) -> SimulationRun:
    """March f and the fields with dt = dx.

    Each step: predictor transport through fields frozen at t, provisional
    field step, corrector transport through fields interpolated linearly
    between t and t + dt, then the final field step from the corrected
    moments (so Gauss's law holds exactly for the stored f).
    """
    validate_config(cfg)
    stride = snapshot_stride or cfg.output.snapshot_stride
    run, f = _new_run(cfg)
    grid, dt, bd, lam, pot = run.grid, cfg.dt, cfg.boundary_data, cfg.lam, cfg.potential
    flush = FLUSH_RELATIVE * run.f0_grid_max
    cur = moments(f, grid)
    fstate = initial_field_state(cfg, cur.rho)
    flux_prev = boundary_flux(fstate)
    accum = 0.0
    n_steps = cfg.n_steps
    _record(run, 0, f, fstate, cur, kinetic_moments(f, grid), accum, True, abort_on_violation)
    for n in range(n_steps):
        t_new = (n + 1) * dt
        try:
            f_pred = replace(advance_f(f, FieldSampler.frozen(fstate, pot), dt, grid, flush),
                             t=t_new)
            state_pred = step_fields(fstate, cur, moments(f_pred, grid), bd, lam)
            f = replace(advance_f(f, FieldSampler.from_states([fstate, state_pred], pot), dt,
                                  grid, flush), t=t_new)
        except ConfinementError as exc:
            exc.step = n + 1
            raise
        cur_new = moments(f, grid)
        fstate = step_fields(fstate, cur, cur_new, bd, lam)
        cur = cur_new
        flux = boundary_flux(fstate)
        accum += 0.5 * dt * (flux_prev + flux)
        flux_prev = flux
        keep = (n + 1) % stride == 0 or n + 1 == n_steps
        _record(run, n + 1, f, fstate, cur, kinetic_moments(f, grid), accum, keep,
                abort_on_violation)
        if progress is not None:
            progress(n + 1, n_steps)
    return run


# ----------------------------------------------------------------------------
# Picard iteration over the whole time slab

@dataclass
class PicardState:
    n: int
    f: np.ndarray  # (nt, nx+1, nv+1, nv+1)
    fields: list[FieldState]
    currents: list[CurrentSlice]
    residual: float = float("inf")


def _slab_times(cfg: SimConfig) -> np.ndarray:
    return cfg.dt * np.arange(cfg.n_steps + 1)


def picard_initial(cfg: SimConfig) -> PicardState:
    """Iterate 0: f frozen at f0, E1 from the initial density, (E2, B) frozen at their data."""
    grid = PhaseSpaceGrid.from_config(cfg)
    f0 = initial_distribution(cfg, grid)
    cur0 = moments(f0, grid)
    e1 = compute_e1(cur0.rho, cfg.lam, cfg.dx)
    e2 = cfg.initial_data.E2_0(grid.x)
    b = cfg.initial_data.B_0(grid.x)
    times = _slab_times(cfg)
    fields = [FieldState.from_e2_b(t, e1, e2, b) for t in times]
    currents = [CurrentSlice(t, cur0.rho, cur0.j1, cur0.j2) for t in times]
    f = np.broadcast_to(f0.values, (times.size,) + f0.values.shape)
    return PicardState(n=0, f=f, fields=fields, currents=currents)


def _active_x(cfg: SimConfig, grid: PhaseSpaceGrid, const: TheoreticalConstants):
    """x-node range that can carry f: [theta0, 1 - theta0] with confinement, interior otherwise."""
    if cfg.potential.form == "none" or cfg.initial_data.f0.x_support is None:
        return 1, grid.nx - 1
    lo = int(np.floor(const.theta0 / grid.dx))
    hi = int(np.ceil((1.0 - const.theta0) / grid.dx))
    return max(lo, 1), min(hi, grid.nx - 1)


def _direct_slab(cfg: SimConfig, currents: list[CurrentSlice]) -> list[tuple[np.ndarray, np.ndarray]]:
    """(E2, B) on every node of the slab from the light-cone representation."""
    x = np.linspace(0.0, 1.0, cfg.nx + 1)
    arch = SliceArchive.from_slices(currents, "j2", cfg.dx)
    init, bd = cfg.initial_data, cfg.boundary_data
    out = []
    for k, cur in enumerate(currents):
        t = cur.t
        e2 = np.empty(x.size)
        b = np.empty(x.size)
        for i in range(1, x.size - 1):
            e2[i], b[i] = solve_e2_b_direct(t, float(x[i]), cfg, arch)
        if k == 0:
            e2[0], b[0] = init.E2_0(0.0), init.B_0(0.0)
            e2[-1], b[-1] = init.E2_0(1.0), init.B_0(1.0)
        else:
            # ends: incoming invariant from the data, outgoing one from the neighbour diagonal
            prev = out[k - 1]
            dt = cfg.dt
            kp_prev = prev[0] + prev[1]
            km_prev = prev[0] - prev[1]
            j_now, j_old = cur.j2, currents[k - 1].j2
            kp0 = float(bd.k_plus_left(t))
            km0 = km_prev[1] - 0.5 * dt * (j_old[1] + j_now[0])
            kp1 = kp_prev[-2] - 0.5 * dt * (j_old[-2] + j_now[-1])
            km1 = float(bd.k_minus_right(t))
            e2[0], b[0] = 0.5 * (kp0 + km0), 0.5 * (kp0 - km0)
            e2[-1], b[-1] = 0.5 * (kp1 + km1), 0.5 * (kp1 - km1)
        out.append((e2, b))
    return out


def picard_iterate_once(prev: PicardState, cfg: SimConfig,
                        const: TheoreticalConstants | None = None) -> PicardState:
    """One sweep: trace every node back to s = 0 through the previous fields, re-solve the fields."""
    grid = PhaseSpaceGrid.from_config(cfg)
    const = const or theoretical_constants(cfg)
    sampler = FieldSampler.from_states(prev.fields, cfg.potential)
    times = _slab_times(cfg)
    lo, hi = _active_x(cfg, grid, const)
    prm = cfg.initial_data.f0.as_array()
    f = np.empty((times.size,) + (grid.nx + 1, grid.nv + 1, grid.nv + 1))
    currents = []
    empty = cfg.initial_data.f0.x_support is None
    for k, t in enumerate(times):
        if empty:
            # f0 = 0 is transported to f = 0; nothing to trace
            f[k] = 0.0
            currents.append(CurrentSlice.zeros(float(t), grid.nx + 1))
            continue
        nsub = 0 if k == 0 else n_substeps(t, cfg.dt)
        vals, nfail, first = K.pull_f0(grid.nx + 1, grid.dx, float(grid.v[0]), grid.dv,
                                       grid.nv + 1, lo, hi, float(t), nsub, sampler.t0,
                                       sampler.dt, sampler.e1, sampler.e2, sampler.b,
                                       cfg.potential.as_array(), prm)
        if nfail:
            i, j, m = np.unravel_index(first, vals.shape)
            trace(float(t), PhasePoint(float(grid.x[i]), float(grid.v[j]), float(grid.v[m])),
                  sampler, 0.0, cfg.dt)
            raise ConfinementError(f"confinement violated at {nfail} nodes (t={t})")
        if k == 0:
            vals[0] = vals[-1] = 0.0
        f[k] = vals
        cur = moments(DistributionState(float(t), vals), grid)
        currents.append(cur)
    slab = _direct_slab(cfg, currents)
    fields = [FieldState.from_e2_b(float(t), compute_e1(c.rho, cfg.lam, cfg.dx), e2, b)
              for t, c, (e2, b) in zip(times, currents, slab)]
    res = float(np.max(np.abs(f - prev.f)))
    for a, b in zip(fields, prev.fields):
        res = max(res, float(np.max(np.abs(a.e1 - b.e1))), float(np.max(np.abs(a.e2 - b.e2))),
                  float(np.max(np.abs(a.b - b.b))))
    return PicardState(n=prev.n + 1, f=f, fields=fields, currents=currents, residual=res)


def run_picard(cfg: SimConfig, progress=None) -> SimulationRun:
    """Iterate until the sup-norm change drops below picard_tol."""
    validate_config(cfg)
    run, _ = _new_run(cfg)
    state = picard_initial(cfg)
    residuals: list[float] = []
    for _ in range(cfg.picard_max_iter):
        state = picard_iterate_once(state, cfg, run.constants)
        residuals.append(state.residual)
        log.info("picard iterate %d residual %.3e", state.n, state.residual)
        if progress is not None:
            progress(state.n, state.residual)
        if state.residual <= cfg.picard_tol:
            break
    else:
        raise PicardDivergence(residuals)
    run.residuals = residuals
    grid = run.grid
    accum = 0.0
    flux_prev = 0.0
    for k, (fs, cur) in enumerate(zip(state.fields, state.currents)):
        dist = DistributionState.with_support(fs.t, np.array(state.f[k]), grid)
        flux = boundary_flux(fs)
        if k > 0:
            accum += 0.5 * cfg.dt * (flux_prev + flux)
        flux_prev = flux
        keep = k % cfg.output.snapshot_stride == 0 or k == len(state.fields) - 1
        _record(run, k, dist, fs, cur, kinetic_moments(dist, grid), accum, keep, False)
    return run


def run(cfg: SimConfig, **kwargs) -> SimulationRun:
    if cfg.solver_mode == "picard":
        return run_picard(cfg)
    return run_time_marching(cfg, **kwargs)
