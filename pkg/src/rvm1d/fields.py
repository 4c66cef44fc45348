"""Maxwell half: E1 from Gauss's law, (E2, B) along light-cone characteristics.

With dt = dx the invariants k+ = E2 + B and k- = E2 - B move exactly one
cell per step, so the only discretization error left is the trapezoid rule
for the current source along each characteristic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import BoundaryDataSpec, SimConfig

__all__ = [
    "FieldState",
    "CurrentSlice",
    "SliceArchive",
    "compute_e1",
    "retarded_times",
    "initial_field_state",
    "step_fields",
    "solve_e2_b_direct",
]


@dataclass(frozen=True)
class FieldState:
    t: float
    e1: np.ndarray
    k_plus: np.ndarray
    k_minus: np.ndarray

    @property
    def e2(self) -> np.ndarray:
        return 0.5 * (self.k_plus + self.k_minus)

    @property
    def b(self) -> np.ndarray:
        return 0.5 * (self.k_plus - self.k_minus)

    @classmethod
    def from_e2_b(cls, t, e1, e2, b) -> FieldState:
        e2 = np.asarray(e2, dtype=float)
        b = np.asarray(b, dtype=float)
        return cls(t=t, e1=np.asarray(e1, dtype=float), k_plus=e2 + b, k_minus=e2 - b)


@dataclass(frozen=True)
class CurrentSlice:
    t: float
    rho: np.ndarray
    j1: np.ndarray
    j2: np.ndarray

    @classmethod
    def zeros(cls, t: float, n: int) -> CurrentSlice:
        z = np.zeros(n)
        return cls(t=t, rho=z, j1=z, j2=z)


class SliceArchive:
    """Uniform-in-time stack of nodal slices, callable as g(tau, y) with bilinear interpolation."""

    def __init__(self, t0: float, dt: float, values: np.ndarray, dx: float):
        self.t0 = float(t0)
        self.dt = float(dt)
        self.values = np.atleast_2d(np.asarray(values, dtype=float))
        self.dx = float(dx)

    @classmethod
    def from_slices(cls, slices, attr: str = "j2", dx: float | None = None) -> SliceArchive:
        slices = list(slices)
        n = len(getattr(slices[0], attr))
        dt = slices[1].t - slices[0].t if len(slices) > 1 else 1.0
        return cls(slices[0].t, dt, np.stack([getattr(s, attr) for s in slices]),
                   dx if dx is not None else 1.0 / (n - 1))

    @property
    def t_end(self) -> float:
        return self.t0 + (self.values.shape[0] - 1) * self.dt

    def __call__(self, tau, y):
        tau, y = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(y, dtype=float))
        nt, n1 = self.values.shape
        u = (tau - self.t0) / self.dt
        if nt == 1:
            k = np.zeros(u.shape, dtype=int)
            w = np.zeros(u.shape)
        else:
            k = np.clip(np.floor(u + 1e-9).astype(int), 0, nt - 2)
            w = u - k
        xi = y / self.dx
        i = np.clip(np.floor(xi + 1e-9).astype(int), 0, n1 - 2)
        th = xi - i
        # snap round-off so grid-aligned queries reproduce stored nodes bit-for-bit
        w = np.where(np.abs(w) < 1e-9, 0.0, np.where(np.abs(w - 1) < 1e-9, 1.0, w))
        th = np.where(np.abs(th) < 1e-9, 0.0, np.where(np.abs(th - 1) < 1e-9, 1.0, th))
        v = self.values
        k1 = np.minimum(k + 1, nt - 1)
        a = (1 - th) * v[k, i] + th * v[k, i + 1]
        b = (1 - th) * v[k1, i] + th * v[k1, i + 1]
        return np.where(w == 0.0, a, (1 - w) * a + w * b)


def compute_e1(rho: np.ndarray, lam: float, dx: float | None = None) -> np.ndarray:
    """E1(x_i) = int_0^{x_i} rho dy + lambda by the composite trapezoid rule."""
    rho = np.asarray(rho, dtype=float)
    if dx is None:
        dx = 1.0 / (rho.size - 1)
    return cumulative_trapezoid(rho, dx=dx, initial=0.0) + lam


def retarded_times(t: float, x: float) -> tuple[float, float]:
    """Times at which the backward light rays from (t, x), 0 < x <= 1/2, leave the domain.

    t_plus: the right-moving ray hits x = 0 (0 if it reaches t = 0 first);
    t_minus: the left-moving ray hits x = 1.
    """
    if not 0.0 < x <= 0.5:
        raise ValueError(f"retarded_times needs 0 < x <= 1/2, got {x!r}")
    t_plus = 0.0 if t <= x else t - x
    t_minus = 0.0 if t <= 1.0 - x else t - 1.0 + x
    return t_plus, t_minus


def initial_field_state(cfg: SimConfig, rho0: np.ndarray | None = None) -> FieldState:
    x = np.linspace(0.0, 1.0, cfg.nx + 1)
    init = cfg.initial_data
    e2 = init.E2_0(x)
    b = init.B_0(x)
    if rho0 is None:
        rho0 = np.zeros_like(x)
    return FieldState.from_e2_b(0.0, compute_e1(rho0, cfg.lam, cfg.dx), e2, b)


def step_fields(state: FieldState, now: CurrentSlice, nxt: CurrentSlice,
                boundary: BoundaryDataSpec, lam: float) -> FieldState:
    """Advance one step dt = dx.

    k+ shifts right and k- shifts left by one node; the source -j2 is
    integrated along each diagonal by the trapezoid rule over the two time
    levels.  Incoming values at x = 0 (k+) and x = 1 (k-) come from the
    boundary data at the new time.
    """
    n = state.k_plus.size
    dx = 1.0 / (n - 1)
    dt = nxt.t - now.t
    if abs(dt - dx) > 1e-12 * dx:
        raise ValueError(f"step_fields needs dt == dx; got dt={dt}, dx={dx}")
    t_new = nxt.t
    kp0 = np.asarray(boundary.k_plus_left(t_new), dtype=float)
    km1 = np.asarray(boundary.k_minus_right(t_new), dtype=float)
    if not (np.isfinite(kp0) and np.isfinite(km1)):
        raise ValueError(f"boundary data missing or non-finite at t={t_new}")
    kp = np.empty(n)
    km = np.empty(n)
    kp[1:] = state.k_plus[:-1] - 0.5 * dt * (now.j2[:-1] + nxt.j2[1:])
    km[:-1] = state.k_minus[1:] - 0.5 * dt * (now.j2[1:] + nxt.j2[:-1])
    kp[0] = kp0
    km[-1] = km1
    return FieldState(t=t_new, e1=compute_e1(nxt.rho, lam, dx), k_plus=kp, k_minus=km)


def _segment_integral(j2, t_start: float, t_end: float, y_of_tau, dt: float) -> float:
    """Trapezoid integral of j2(tau, y(tau)) over [t_start, t_end] with about dt spacing."""
    length = t_end - t_start
    if length <= 0.0:
        return 0.0
    m = max(1, int(np.ceil(length / dt - 1e-9)))
    tau = np.linspace(t_start, t_end, m + 1)
    vals = np.asarray(j2(tau, y_of_tau(tau)), dtype=float)
    return float((length / m) * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


def _representation(t, x, e2_0, b_0, kp_left, km_right, j2, dt):
    """Light-cone representation for 0 < x <= 1/2 (three cases via the retarded times)."""
    t_plus, t_minus = retarded_times(t, x)
    if t <= x:
        a_plus = e2_0(x - t) + b_0(x - t)
    else:
        a_plus = kp_left(t - x)
    if t <= 1.0 - x:
        a_minus = e2_0(x + t) - b_0(x + t)
    else:
        a_minus = km_right(t - 1.0 + x)
    i_plus = _segment_integral(j2, t_plus, t, lambda tau: x - t + tau, dt)
    i_minus = _segment_integral(j2, t_minus, t, lambda tau: x + t - tau, dt)
    kp = float(a_plus) - i_plus
    km = float(a_minus) - i_minus
    return 0.5 * (kp + km), 0.5 * (kp - km)


def solve_e2_b_direct(t: float, x: float, cfg: SimConfig, j2, mirrored: bool | None = None):
    """(E2, B)(t, x) straight from the initial/boundary data and the j2 history.

    ``j2`` is any callable j2(tau, y) (e.g. a SliceArchive).  Points with
    x > 1/2 use the reflected problem x -> 1 - x, under which E2 is even
    and B odd.  ``mirrored`` forces the reflected path (used to test the two
    paths against each other at x = 1/2).
    """
    if t < 0.0 or not 0.0 < x < 1.0:
        raise ValueError(f"solve_e2_b_direct needs t >= 0 and 0 < x < 1; got t={t}, x={x}")
    init, bd = cfg.initial_data, cfg.boundary_data
    dt = cfg.dt
    if t == 0.0:
        return float(init.E2_0(x)), float(init.B_0(x))
    if mirrored is None:
        mirrored = x > 0.5
    if not mirrored:
        return _representation(t, x, init.E2_0, init.B_0, bd.k_plus_left, bd.k_minus_right,
                               j2, dt)
    # reflected data: E2'(y) = E2(1-y), B'(y) = -B(1-y), boundary ends swapped
    e2r = lambda y: init.E2_0(1.0 - y)  # noqa: E731
    br = lambda y: -init.B_0(1.0 - y)  # noqa: E731
    kp_left = lambda s: bd.E2_b_right(s) - bd.B_b_right(s)  # noqa: E731
    km_right = lambda s: bd.E2_b_left(s) + bd.B_b_left(s)  # noqa: E731
    j2r = lambda tau, y: j2(tau, 1.0 - y)  # noqa: E731
    e2, b = _representation(t, 1.0 - x, e2r, br, kp_left, km_right, j2r, dt)
    return e2, -b
