"""Compiled inner loops: characteristic RK4, semi-Lagrangian pull, f0 pull-back.

Field arrays have shape (nt, nx + 1) on a uniform time axis starting at t0
with spacing dtf; nt == 1 means fields frozen in time.  ``pot`` packs
(kind, c0, gamma) with kind 0 = no external field, 1 = c0 / (x(1-x))**gamma.
Status codes: 0 ok, 1 left (0, 1).
"""
import math
import os

import numpy as np
from numba import njit, prange, set_num_threads, config as numba_config

_threads = int(os.environ.get("RVM_THREADS", "0") or 0)
if _threads > 0:
    set_num_threads(min(_threads, numba_config.NUMBA_NUM_THREADS))


@njit(cache=True, inline="always")
def b_ext(x, pot):
    if pot[0] == 0.0:
        return 0.0
    q = x * (1.0 - x)
    if pot[2] == 1.0:
        return pot[1] * (2.0 * x - 1.0) / (q * q)
    return pot[2] * pot[1] * (2.0 * x - 1.0) / q ** (pot[2] + 1.0)


@njit(cache=True, inline="always")
def psi_ext(x, pot):
    if pot[0] == 0.0:
        return 0.0
    return pot[1] / (x * (1.0 - x)) ** pot[2]


@njit(cache=True, inline="always")
def _time_weight(s, t0, dtf, nt):
    if nt == 1:
        return 0, 0.0
    u = (s - t0) / dtf
    k = int(math.floor(u))
    if k < 0:
        k = 0
    elif k > nt - 2:
        k = nt - 2
    return k, u - k


@njit(cache=True, inline="always")
def _lerp2(arr, k, w, i, th, nt):
    a = (1.0 - th) * arr[k, i] + th * arr[k, i + 1]
    if nt == 1 or w == 0.0:
        return a
    b = (1.0 - th) * arr[k + 1, i] + th * arr[k + 1, i + 1]
    return (1.0 - w) * a + w * b


@njit(cache=True)
def fields_at(s, x, t0, dtf, E1, E2, B, dx):
    """Bilinear (t, x) interpolation of the stored fields."""
    nt = E1.shape[0]
    nx = E1.shape[1] - 1
    k, w = _time_weight(s, t0, dtf, nt)
    xi = x / dx
    i = int(math.floor(xi))
    if i < 0:
        i = 0
    elif i > nx - 1:
        i = nx - 1
    th = xi - i
    return (_lerp2(E1, k, w, i, th, nt), _lerp2(E2, k, w, i, th, nt),
            _lerp2(B, k, w, i, th, nt))


@njit(cache=True)
def rhs(s, x, v1, v2, t0, dtf, E1, E2, B, dx, pot):
    e1, e2, b = fields_at(s, x, t0, dtf, E1, E2, B, dx)
    g = 1.0 / math.sqrt(1.0 + v1 * v1 + v2 * v2)
    vh1 = v1 * g
    vh2 = v2 * g
    bc = b + b_ext(x, pot)
    return vh1, e1 + vh2 * bc, e2 - vh1 * bc


@njit(cache=True)
def rk4_step(s, x, v1, v2, h, t0, dtf, E1, E2, B, dx, pot):
    """One classical RK4 step; returns (x, v1, v2, status)."""
    a1, b1, c1 = rhs(s, x, v1, v2, t0, dtf, E1, E2, B, dx, pot)
    x2 = x + 0.5 * h * a1
    if not (0.0 < x2 < 1.0):
        return x2, v1, v2, 1
    a2, b2, c2 = rhs(s + 0.5 * h, x2, v1 + 0.5 * h * b1, v2 + 0.5 * h * c1,
                     t0, dtf, E1, E2, B, dx, pot)
    x3 = x + 0.5 * h * a2
    if not (0.0 < x3 < 1.0):
        return x3, v1, v2, 1
    a3, b3, c3 = rhs(s + 0.5 * h, x3, v1 + 0.5 * h * b2, v2 + 0.5 * h * c2,
                     t0, dtf, E1, E2, B, dx, pot)
    x4 = x + h * a3
    if not (0.0 < x4 < 1.0):
        return x4, v1, v2, 1
    a4, b4, c4 = rhs(s + h, x4, v1 + h * b3, v2 + h * c3, t0, dtf, E1, E2, B, dx, pot)
    xn = x + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    v1n = v1 + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    v2n = v2 + h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
    if not (0.0 < xn < 1.0):
        return xn, v1n, v2n, 1
    return xn, v1n, v2n, 0


@njit(cache=True)
def trace_point(s0, x, v1, v2, s1, nsub, t0, dtf, E1, E2, B, dx, pot):
    h = (s1 - s0) / nsub
    s = s0
    for n in range(nsub):
        x, v1, v2, st = rk4_step(s, x, v1, v2, h, t0, dtf, E1, E2, B, dx, pot)
        if st != 0:
            return x, v1, v2, st
        s = s0 + (n + 1) * h
    return x, v1, v2, 0


@njit(cache=True)
def trace_record(s0, x, v1, v2, s1, nsub, t0, dtf, E1, E2, B, dx, pot):
    """Trace and keep every substep; rows are (s, x, v1, v2). Returns (rows, n_valid, status)."""
    out = np.empty((nsub + 1, 4))
    out[0, 0] = s0
    out[0, 1] = x
    out[0, 2] = v1
    out[0, 3] = v2
    h = (s1 - s0) / nsub
    for n in range(nsub):
        s = s0 + n * h
        x, v1, v2, st = rk4_step(s, x, v1, v2, h, t0, dtf, E1, E2, B, dx, pot)
        out[n + 1, 0] = s0 + (n + 1) * h
        out[n + 1, 1] = x
        out[n + 1, 2] = v1
        out[n + 1, 3] = v2
        if st != 0:
            return out, n + 2, st
    return out, nsub + 1, 0


@njit(cache=True, parallel=True)
def trace_batch(xs, v1s, v2s, s0, s1, nsub, t0, dtf, E1, E2, B, dx, pot):
    n = xs.size
    ox = np.empty(n)
    ov1 = np.empty(n)
    ov2 = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    for p in prange(n):
        a, b, c, st = trace_point(s0, xs[p], v1s[p], v2s[p], s1, nsub,
                                  t0, dtf, E1, E2, B, dx, pot)
        ox[p] = a
        ov1[p] = b
        ov2[p] = c
        status[p] = st
    return ox, ov1, ov2, status


@njit(cache=True, inline="always")
def trilinear(f, x, v1, v2, dx, vmin, dv):
    """Tensor-product linear interpolation of f[ix, iv1, iv2]; zero off the v grid."""
    nx = f.shape[0] - 1
    nv = f.shape[1] - 1
    u1 = (v1 - vmin) / dv
    u2 = (v2 - vmin) / dv
    if u1 < 0.0 or u1 > nv or u2 < 0.0 or u2 > nv:
        return 0.0
    xi = x / dx
    i = int(math.floor(xi))
    if i < 0:
        i = 0
    elif i > nx - 1:
        i = nx - 1
    j = int(math.floor(u1))
    if j > nv - 1:
        j = nv - 1
    k = int(math.floor(u2))
    if k > nv - 1:
        k = nv - 1
    a = xi - i
    b = u1 - j
    c = u2 - k
    return ((1 - a) * ((1 - b) * ((1 - c) * f[i, j, k] + c * f[i, j, k + 1])
                       + b * ((1 - c) * f[i, j + 1, k] + c * f[i, j + 1, k + 1]))
            + a * ((1 - b) * ((1 - c) * f[i + 1, j, k] + c * f[i + 1, j, k + 1])
                   + b * ((1 - c) * f[i + 1, j + 1, k] + c * f[i + 1, j + 1, k + 1])))


@njit(cache=True)
def _row_boxes(f):
    """Per x-row index box [jlo, jhi] x [klo, khi] of the nonzero entries (jlo > jhi if empty)."""
    nx1, nv1, _ = f.shape
    box = np.empty((nx1, 4), dtype=np.int64)
    for i in range(nx1):
        jlo, jhi, klo, khi = nv1, -1, nv1, -1
        for j in range(nv1):
            for k in range(nv1):
                if f[i, j, k] != 0.0:
                    if j < jlo:
                        jlo = j
                    if j > jhi:
                        jhi = j
                    if k < klo:
                        klo = k
                    if k > khi:
                        khi = k
        box[i, 0] = jlo
        box[i, 1] = jhi
        box[i, 2] = klo
        box[i, 3] = khi
    return box


@njit(cache=True, parallel=True)
def sl_advance(fprev, dx, vmin, dv, i_lo, i_hi, s0, s1, nsub, t0, dtf, E1, E2, B, pot):
    """f(s0, node) = fprev(foot), foot = backward trace from s0 to s1 (s1 < s0).

    Only x-nodes i_lo..i_hi are traced; the rest are zero.  Within a row,
    nodes farther (in v) from the nonzero data of rows i-2..i+2 than the
    largest possible velocity change over the step pull back a zero and are
    skipped.  Returns (fnew, n_failed, first failed flat index).
    """
    nx1, nv1, _ = fprev.shape
    fnew = np.zeros_like(fprev)
    fails = np.zeros(nx1, dtype=np.int64)
    first = np.full(nx1, -1, dtype=np.int64)
    box = _row_boxes(fprev)
    fld = np.abs(E1).max() + np.abs(E2).max() + np.abs(B).max()
    span = abs(s0 - s1)
    for i in prange(i_lo, i_hi + 1):
        x = i * dx
        jlo, jhi, klo, khi = nv1, -1, nv1, -1
        for ii in range(max(i - 2, 0), min(i + 2, nx1 - 1) + 1):
            if box[ii, 1] >= 0:
                jlo = min(jlo, box[ii, 0])
                jhi = max(jhi, box[ii, 1])
                klo = min(klo, box[ii, 2])
                khi = max(khi, box[ii, 3])
        if jhi < 0:
            continue
        # |dV/ds| <= |E1| + |E2| + |B + B_ext|, with X within span of x
        xa = max(x - span - dx, 0.5 * dx)
        xb = min(x + span + dx, 1.0 - 0.5 * dx)
        bx = max(abs(b_ext(xa, pot)), abs(b_ext(xb, pot)))
        if xa < 0.5 < xb:
            bx = max(bx, abs(b_ext(0.5, pot)))
        pad = int(math.ceil((fld + bx) * span / dv)) + 1
        j0, j1 = max(jlo - pad, 0), min(jhi + pad, nv1 - 1)
        k0, k1 = max(klo - pad, 0), min(khi + pad, nv1 - 1)
        for j in range(j0, j1 + 1):
            v1 = vmin + j * dv
            for k in range(k0, k1 + 1):
                v2 = vmin + k * dv
                fx, fv1, fv2, st = trace_point(s0, x, v1, v2, s1, nsub,
                                               t0, dtf, E1, E2, B, dx, pot)
                if st != 0:
                    fails[i] += 1
                    if first[i] < 0:
                        first[i] = (i * nv1 + j) * nv1 + k
                    continue
                fnew[i, j, k] = trilinear(fprev, fx, fv1, fv2, dx, vmin, dv)
    nfail = 0
    firstidx = -1
    for i in range(nx1):
        nfail += fails[i]
        if firstidx < 0 and first[i] >= 0:
            firstidx = first[i]
    return fnew, nfail, firstidx


@njit(cache=True, inline="always")
def f0_eval(x, v1, v2, prm):
    """Raised-cosine bump; prm = (kind, A, xc, w, r, v1c, v2c)."""
    if prm[0] == 0.0:
        return 0.0
    ux = (x - prm[2]) / prm[3]
    if ux <= -1.0 or ux >= 1.0:
        return 0.0
    d1 = v1 - prm[5]
    d2 = v2 - prm[6]
    r = math.sqrt(d1 * d1 + d2 * d2) / prm[4]
    if r >= 1.0:
        return 0.0
    cx = math.cos(0.5 * math.pi * ux)
    cr = math.cos(0.5 * math.pi * r)
    return prm[1] * cx * cx * cr * cr


@njit(cache=True, parallel=True)
def pull_f0(nx1, dx, vmin, dv, nv1, i_lo, i_hi, s0, nsub, t0, dtf, E1, E2, B, pot, prm):
    """f(s0, node) = f0(X(0), V(0)) by tracing every active node back to s = 0."""
    fnew = np.zeros((nx1, nv1, nv1))
    fails = np.zeros(nx1, dtype=np.int64)
    first = np.full(nx1, -1, dtype=np.int64)
    for i in prange(i_lo, i_hi + 1):
        x = i * dx
        for j in range(nv1):
            v1 = vmin + j * dv
            for k in range(nv1):
                v2 = vmin + k * dv
                if nsub == 0:
                    fnew[i, j, k] = f0_eval(x, v1, v2, prm)
                    continue
                fx, fv1, fv2, st = trace_point(s0, x, v1, v2, 0.0, nsub,
                                               t0, dtf, E1, E2, B, dx, pot)
                if st != 0:
                    fails[i] += 1
                    if first[i] < 0:
                        first[i] = (i * nv1 + j) * nv1 + k
                    continue
                fnew[i, j, k] = f0_eval(fx, fv1, fv2, prm)
    nfail = 0
    firstidx = -1
    for i in range(nx1):
        nfail += fails[i]
        if firstidx < 0 and first[i] >= 0:
            firstidx = first[i]
    return fnew, nfail, firstidx
