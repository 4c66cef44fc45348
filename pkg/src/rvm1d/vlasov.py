"""Semi-Lagrangian transport of f and its velocity moments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .characteristics import ConfinementError, FieldSampler, PhasePoint, n_substeps, trace
from .core import PhaseSpaceGrid, SimConfig
from .fields import CurrentSlice

__all__ = [
    "DistributionState",
    "KineticMoments",
    "initial_distribution",
    "moments",
    "kinetic_moments",
    "advance_f",
    "support_extents",
    "FLUSH_RELATIVE",
]

# values below this fraction of max f0 are flushed to zero after each step,
# which stops the interpolation tail from creeping one cell per step forever
FLUSH_RELATIVE = 1e-14


@dataclass(frozen=True)
class DistributionState:
    t: float
    values: np.ndarray
    support_x: tuple[float, float] | None = None
    support_v_radius: float = 0.0

    @classmethod
    def with_support(cls, t: float, values: np.ndarray, grid: PhaseSpaceGrid) -> DistributionState:
        sigma, radius = support_extents(values, grid, 0.0)
        return cls(t=t, values=values, support_x=sigma, support_v_radius=radius)


@dataclass(frozen=True)
class KineticMoments:
    """Moments needed by the energy and cone diagnostics."""

    t: float
    kinetic: np.ndarray  # int sqrt(1+|v|^2) f dv
    p1: np.ndarray  # int v1 f dv
    abs_j2: np.ndarray  # int |v2_hat| f dv


def initial_distribution(cfg: SimConfig, grid: PhaseSpaceGrid | None = None) -> DistributionState:
    grid = grid or PhaseSpaceGrid.from_config(cfg)
    x = grid.x[:, None, None]
    v1 = grid.v[None, :, None]
    v2 = grid.v[None, None, :]
    values = cfg.initial_data.f0(x, v1, v2)
    values[0] = values[-1] = 0.0
    return DistributionState.with_support(0.0, values, grid)


def _vweights(grid: PhaseSpaceGrid) -> np.ndarray:
    return grid.v_weights()


def moments(f: DistributionState, grid: PhaseSpaceGrid) -> CurrentSlice:
    """rho = int f dv and j = int v_hat f dv by the tensor-product trapezoid rule."""
    w = _vweights(grid)
    vh1, vh2 = _vhat_mesh(grid)
    vals = f.values
    rho = np.tensordot(vals, w, axes=([1, 2], [0, 1]))
    j1 = np.tensordot(vals, w * vh1, axes=([1, 2], [0, 1]))
    j2 = np.tensordot(vals, w * vh2, axes=([1, 2], [0, 1]))
    return CurrentSlice(t=f.t, rho=rho, j1=j1, j2=j2)


def kinetic_moments(f: DistributionState, grid: PhaseSpaceGrid) -> KineticMoments:
    w = _vweights(grid)
    v1, v2 = grid.v_mesh()
    gam = np.sqrt(1.0 + v1 * v1 + v2 * v2)
    vals = f.values
    return KineticMoments(
        t=f.t,
        kinetic=np.tensordot(vals, w * gam, axes=([1, 2], [0, 1])),
        p1=np.tensordot(vals, w * v1, axes=([1, 2], [0, 1])),
        abs_j2=np.tensordot(vals, w * np.abs(v2) / gam, axes=([1, 2], [0, 1])),
    )


def _vhat_mesh(grid: PhaseSpaceGrid):
    v1, v2 = grid.v_mesh()
    g = 1.0 / np.sqrt(1.0 + v1 * v1 + v2 * v2)
    return v1 * g, v2 * g


def support_extents(values, grid: PhaseSpaceGrid, tol: float = 0.0):
    """Tight x-interval and v-radius of {f > tol}; (None, 0.0) when empty."""
    if isinstance(values, DistributionState):
        values = values.values
    mask = values > tol
    if not mask.any():
        return None, 0.0
    xs = np.flatnonzero(mask.any(axis=(1, 2)))
    sigma = (float(grid.x[xs[0]]), float(grid.x[xs[-1]]))
    v1, v2 = grid.v_mesh()
    speed = np.hypot(v1, v2)
    radius = float(speed[mask.any(axis=0)].max())
    return sigma, radius


def _active_range(values: np.ndarray, pad: int) -> tuple[int, int] | None:
    cols = np.flatnonzero(values.any(axis=(1, 2)))
    if cols.size == 0:
        return None
    n = values.shape[0] - 1
    return max(1, int(cols[0]) - pad), min(n - 1, int(cols[-1]) + pad)


def advance_f(f: DistributionState, fields: FieldSampler, dt: float, grid: PhaseSpaceGrid,
              flush: float = 0.0) -> DistributionState:
    """One semi-Lagrangian step: f(t + dt, node) = f(t, foot of the backward characteristic).

    Characteristic speeds are below 1 and dt = dx, so a node more than one
    cell away from the current x-support pulls back a zero; only nodes within
    two cells of it are traced.
    """
    t_new = f.t + dt
    rng = _active_range(f.values, pad=2)
    if rng is None:
        return DistributionState(t=t_new, values=np.zeros_like(f.values))
    nsub = n_substeps(dt, grid.dx)
    fnew, nfail, first = K.sl_advance(
        np.ascontiguousarray(f.values), grid.dx, float(grid.v[0]), grid.dv, rng[0], rng[1],
        t_new, f.t, nsub, fields.t0, fields.dt, fields.e1, fields.e2, fields.b,
        fields.potential.as_array())
    if nfail:
        i, j, k = np.unravel_index(first, f.values.shape)
        p = PhasePoint(float(grid.x[i]), float(grid.v[j]), float(grid.v[k]))
        try:
            trace(t_new, p, fields, f.t, grid.dx)
        except ConfinementError as exc:
            raise ConfinementError(f"{exc} ({nfail} nodes failed)", exc.trajectory) from None
        raise ConfinementError(f"confinement violated at {nfail} nodes")
    if flush > 0.0:
        fnew[fnew < flush] = 0.0
    return DistributionState.with_support(t_new, fnew, grid)
