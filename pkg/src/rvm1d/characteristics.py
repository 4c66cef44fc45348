"""Particle characteristics of the Vlasov equation and the confinement estimate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import ExternalPotential
from .fields import FieldState

__all__ = [
    "ConfinementError",
    "PhasePoint",
    "FieldSampler",
    "v_hat",
    "characteristic_rhs",
    "trace",
    "trace_trajectory",
    "trace_many",
    "n_substeps",
    "p_invariant",
    "confinement_bound",
]


class ConfinementError(RuntimeError):
    """A characteristic left (0, 1); carries the recorded trajectory (rows s, x, v1, v2)."""

    def __init__(self, message: str, trajectory: np.ndarray | None = None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class PhasePoint:
    x: float
    v1: float
    v2: float

    def __post_init__(self):
        if not 0.0 < self.x < 1.0:
            raise ValueError(f"phase point must be interior, got x={self.x!r}")


class FieldSampler:
    """Fields on a uniform time axis, interpolated bilinearly in (t, x).

    B_ext is always evaluated from its closed form, never interpolated.
    """

    def __init__(self, t0: float, dt: float, e1, e2, b, potential: ExternalPotential):
        self.t0 = float(t0)
        self.dt = float(dt)
        self.e1 = np.ascontiguousarray(np.atleast_2d(e1), dtype=float)
        self.e2 = np.ascontiguousarray(np.atleast_2d(e2), dtype=float)
        self.b = np.ascontiguousarray(np.atleast_2d(b), dtype=float)
        self.potential = potential
        self.dx = 1.0 / (self.e1.shape[1] - 1)
        self._pot = potential.as_array()

    @classmethod
    def from_states(cls, states, potential: ExternalPotential) -> FieldSampler:
        states = list(states)
        dt = states[1].t - states[0].t if len(states) > 1 else 1.0
        return cls(states[0].t, dt, [s.e1 for s in states], [s.e2 for s in states],
                   [s.b for s in states], potential)

    @classmethod
    def frozen(cls, state: FieldState, potential: ExternalPotential) -> FieldSampler:
        return cls.from_states([state], potential)

    @property
    def nt(self) -> int:
        return self.e1.shape[0]

    @property
    def t_end(self) -> float:
        return self.t0 + (self.nt - 1) * self.dt

    @property
    def kernel_args(self):
        return self.t0, self.dt, self.e1, self.e2, self.b, self.dx, self._pot

    def at(self, s: float, x: float) -> tuple[float, float, float, float]:
        """(E1, E2, B, B_ext) at (s, x)."""
        e1, e2, b = K.fields_at(s, x, self.t0, self.dt, self.e1, self.e2, self.b, self.dx)
        return e1, e2, b, float(self.potential.b_ext(x))

    def b_check(self, s: float, x: float) -> float:
        _, _, b, bext = self.at(s, x)
        return b + bext

    def psi_internal(self, s: float, x) -> np.ndarray:
        """psi(s, x) = int_{1/2}^x B(s, z) dz, exact for the piecewise-linear interpolant."""
        x = np.asarray(x, dtype=float)
        k, w = (0, 0.0) if self.nt == 1 else _time_index(s, self.t0, self.dt, self.nt)
        out = _psi_slice(self.b[k], self.dx, x)
        if w != 0.0:
            out = (1.0 - w) * out + w * _psi_slice(self.b[k + 1], self.dx, x)
        return out

    def e2_midline_integral(self, s: float, t: float) -> float:
        """int_s^t E2(tau, 1/2) d tau for the interpolated field (exact for piecewise-linear time)."""
        if s == t:
            return 0.0
        sign = 1.0
        if s > t:
            s, t = t, s
            sign = -1.0
        col = np.array([K.fields_at(self.t0 + n * self.dt, 0.5, self.t0, self.dt,
                                    self.e1, self.e2, self.b, self.dx)[1]
                        for n in range(self.nt)])
        knots = [s] + [self.t0 + n * self.dt for n in range(self.nt)
                       if s < self.t0 + n * self.dt < t] + [t]
        knots = np.array(knots)
        times = self.t0 + self.dt * np.arange(self.nt)
        vals = np.interp(knots, times, col) if self.nt > 1 else np.full(knots.size, col[0])
        return sign * float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(knots)))


def _time_index(s, t0, dt, nt):
    u = (s - t0) / dt
    k = min(max(int(np.floor(u)), 0), nt - 2)
    return k, u - k


def _psi_slice(b: np.ndarray, dx: float, x: np.ndarray) -> np.ndarray:
    nx = b.size - 1
    cum = np.concatenate(([0.0], np.cumsum(0.5 * dx * (b[1:] + b[:-1]))))

    def big_psi(y):
        xi = y / dx
        i = np.clip(np.floor(xi).astype(int), 0, nx - 1)
        th = xi - i
        return cum[i] + dx * (b[i] * th + 0.5 * (b[i + 1] - b[i]) * th * th)

    return big_psi(x) - big_psi(np.asarray(0.5))


def v_hat(v1, v2):
    """Relativistic velocity v / sqrt(1 + |v|^2)."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    g = 1.0 / np.sqrt(1.0 + v1 * v1 + v2 * v2)
    return v1 * g, v2 * g


def characteristic_rhs(s: float, p: PhasePoint, fields: FieldSampler):
    """(dX/ds, dV1/ds, dV2/ds) = (v1_hat, E1 + v2_hat Bc, E2 - v1_hat Bc)."""
    if not 0.0 < p.x < 1.0:
        raise ValueError("characteristic_rhs: x on the boundary, B_ext is singular there")
    e1, e2, b, bext = fields.at(s, p.x)
    vh1, vh2 = v_hat(p.v1, p.v2)
    bc = b + bext
    return float(vh1), float(e1 + vh2 * bc), float(e2 - vh1 * bc)


def n_substeps(span: float, dt: float) -> int:
    """RK4 substeps for a time span: fixed substep dt / 4."""
    return max(1, int(np.ceil(abs(span) / (0.25 * dt) - 1e-9)))


def trace_trajectory(t: float, p: PhasePoint, fields: FieldSampler, s_target: float,
                     dt: float | None = None) -> np.ndarray:
    """Whole RK4 path from (t, p) to s_target; rows (s, X, V1, V2)."""
    dt = fields.dt if dt is None else dt
    nsub = n_substeps(s_target - t, dt)
    rows, n, status = K.trace_record(t, p.x, p.v1, p.v2, s_target, nsub, *fields.kernel_args)
    if status != 0:
        raise ConfinementError(
            f"confinement violated: characteristic from (t={t}, x={p.x}, v=({p.v1}, {p.v2})) "
            f"left (0, 1) near s={rows[n - 1, 0]:.6g}", rows[:n].copy())
    return rows


def trace(t: float, p: PhasePoint, fields: FieldSampler, s_target: float,
          dt: float | None = None) -> PhasePoint:
    """Solve the characteristic system from (t, p) to s_target (either direction)."""
    rows = trace_trajectory(t, p, fields, s_target, dt)
    return PhasePoint(*rows[-1, 1:])


def trace_many(t: float, x, v1, v2, fields: FieldSampler, s_target: float,
               dt: float | None = None):
    """Vectorized trace of many phase points; raises ConfinementError on the first escape."""
    dt = fields.dt if dt is None else dt
    x, v1, v2 = (np.ascontiguousarray(np.ravel(a), dtype=float)
                 for a in np.broadcast_arrays(x, v1, v2))
    nsub = n_substeps(s_target - t, dt)
    ox, ov1, ov2, status = K.trace_batch(x, v1, v2, t, s_target, nsub, *fields.kernel_args)
    bad = np.flatnonzero(status)
    if bad.size:
        i = int(bad[0])
        trace_trajectory(t, PhasePoint(x[i], v1[i], v2[i]), fields, s_target, dt)
    return ox, ov1, ov2


def p_invariant(s: float, p: PhasePoint, fields: FieldSampler) -> float:
    """v2 + psi(s, x) + psi_ext(x), the generalized momentum conjugate to the symmetry in y."""
    psi = float(fields.psi_internal(s, p.x))
    return p.v2 + psi + float(fields.potential.psi(p.x))


def confinement_bound(x: float, v, alpha: float, C0: float, C0p: float,
                      pot: ExternalPotential) -> float:
    """Certified lower bound on dist(X(s), boundary) for |s - t| <= alpha."""
    if pot.form == "none":
        return 0.0
    speed = float(np.hypot(*v)) if np.ndim(v) else abs(float(v))
    denom = 1.0 / pot.c0 + 2.0 * speed + C0p + 3.0 * C0 * alpha + abs(float(pot.psi(x)))
    return float((pot.c0 / denom) ** (1.0 / pot.gamma))
