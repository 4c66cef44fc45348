"""Closed-form descriptors for initial data, boundary data and the plasma.

Every descriptor is a small named form with numeric parameters, so configs
stay reproducible and the sup norms needed by the bound constants can be
computed without reference to any simulation grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, optimize

__all__ = ["Profile", "PlasmaProfile", "profile_sup", "product_sup"]


_PROFILE_KINDS = {
    "zero": (),
    "constant": ("value",),
    "linear": ("slope", "intercept"),
    "cosine": ("offset", "modes"),
    "gaussian": ("amplitude", "center", "width"),
}


@dataclass(frozen=True)
class Profile:
    """Scalar function of one variable (x for initial data, t for boundary data).

    Kinds
    -----
    zero
        identically 0.
    constant
        ``value``.
    linear
        ``slope * s + intercept``.
    cosine
        ``offset + sum(a * cos(k * s + phase) for a, k, phase in modes)``.
    gaussian
        ``amplitude * exp(-(s - center)**2 / (2 width**2))``.
    """

    kind: str = "zero"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        expected = set(_PROFILE_KINDS[self.kind])
        got = set(self.params)
        if got != expected:
            raise ValueError(
                f"profile {self.kind!r} takes parameters {sorted(expected)}, got {sorted(got)}"
            )
        if self.kind == "gaussian" and not self.params["width"] > 0:
            raise ValueError("gaussian width must be positive")
        if self.kind == "cosine":
            modes = tuple(tuple(float(c) for c in m) for m in self.params["modes"])
            if any(len(m) != 3 for m in modes):
                raise ValueError("cosine modes are [amplitude, wavenumber, phase] triples")
            # freeze the mode list so the descriptor stays hashable-ish and immutable
            object.__setattr__(self, "params", {"offset": float(self.params["offset"]),
                                                "modes": modes})

    @classmethod
    def zero(cls) -> Profile:
        return cls("zero", {})

    @classmethod
    def constant(cls, value: float) -> Profile:
        return cls("constant", {"value": float(value)})

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> Profile:
        return cls("linear", {"slope": float(slope), "intercept": float(intercept)})

    @classmethod
    def cosine(cls, modes, offset: float = 0.0) -> Profile:
        return cls("cosine", {"offset": float(offset), "modes": modes})

    @classmethod
    def gaussian(cls, amplitude: float, center: float, width: float) -> Profile:
        return cls("gaussian", {"amplitude": float(amplitude), "center": float(center),
                                "width": float(width)})

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "constant":
            return np.full_like(s, p["value"])
        if self.kind == "linear":
            return p["slope"] * s + p["intercept"]
        if self.kind == "cosine":
            out = np.full_like(s, p["offset"])
            for a, k, ph in p["modes"]:
                out = out + a * np.cos(k * s + ph)
            return out
        return p["amplitude"] * np.exp(-((s - p["center"]) ** 2) / (2.0 * p["width"] ** 2))

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind in ("zero", "constant"):
            return np.zeros_like(s)
        if self.kind == "linear":
            return np.full_like(s, p["slope"])
        if self.kind == "cosine":
            out = np.zeros_like(s)
            for a, k, ph in p["modes"]:
                out = out - a * k * np.sin(k * s + ph)
            return out
        return -(s - p["center"]) / p["width"] ** 2 * self(s)

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "constant":
            return self.params["value"] == 0.0
        if self.kind == "linear":
            return self.params["slope"] == 0.0 and self.params["intercept"] == 0.0
        if self.kind == "cosine":
            return self.params["offset"] == 0.0 and all(m[0] == 0.0 for m in self.params["modes"])
        return self.params["amplitude"] == 0.0

    def to_dict(self) -> dict:
        params = dict(self.params)
        if self.kind == "cosine":
            params["modes"] = [list(m) for m in params["modes"]]
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> Profile:
        unknown = set(d) - {"kind", "params"}
        if unknown:
            raise ValueError(f"unknown profile keys {sorted(unknown)}")
        return cls(d.get("kind", "zero"), dict(d.get("params", {})))


def _dense_sup(fun, a: float, b: float, n: int = 4097) -> float:
    """Sup of |fun| on [a, b]: dense bracketing, then bounded refinement of every near-top peak."""
    if b <= a:
        return float(abs(fun(np.array([a]))[0]))
    s = np.linspace(a, b, n)
    vals = np.abs(fun(s))
    best = float(vals.max())
    # sampled local maxima (endpoints included) close enough to the top to hide the true sup
    left = np.concatenate(([-np.inf], vals[:-1]))
    right = np.concatenate((vals[1:], [-np.inf]))
    peaks = np.flatnonzero((vals >= left) & (vals >= right) & (vals >= best * (1 - 1e-3) - 1e-300))
    peaks = peaks[np.argsort(vals[peaks])[::-1][:32]]

    def neg(u):
        return -abs(float(fun(np.array([u]))[0]))

    for i in peaks:
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, n - 1)]
        res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-13})
        best = max(best, -float(res.fun))
    return best


def profile_sup(prof: Profile, a: float, b: float) -> float:
    """Sup norm of a profile over [a, b], closed form wherever the kind allows."""
    p = prof.params
    if prof.kind == "zero":
        return 0.0
    if prof.kind == "constant":
        return abs(p["value"])
    if prof.kind == "linear":
        return float(max(abs(prof(a)), abs(prof(b))))
    if prof.kind == "gaussian":
        c = min(max(p["center"], a), b)
        return float(abs(prof(c)))
    modes = p["modes"]
    if len(modes) == 1:
        amp, k, ph = modes[0]
        cands = [a, b]
        if k != 0.0:
            # extrema of cos(k s + ph) sit at k s + ph = m pi
            m_lo, m_hi = sorted(((k * a + ph) / np.pi, (k * b + ph) / np.pi))
            for m in range(int(np.ceil(m_lo)), int(np.floor(m_hi)) + 1):
                cands.append((m * np.pi - ph) / k)
        return float(np.max(np.abs(prof(np.array(cands)))))
    return _dense_sup(prof, a, b)


def product_sup(p: Profile, q: Profile, a: float, b: float) -> float:
    """Sup of |p q| over [a, b]."""
    if p.is_zero or q.is_zero:
        return 0.0
    if p.kind == "constant":
        return abs(p.params["value"]) * profile_sup(q, a, b)
    if q.kind == "constant":
        return abs(q.params["value"]) * profile_sup(p, a, b)
    return _dense_sup(lambda s: p(s) * q(s), a, b)


_PLASMA_KINDS = {
    "zero": (),
    "bump": ("amplitude", "x_center", "x_halfwidth", "v_radius", "v1_center", "v2_center"),
}


@dataclass(frozen=True)
class PlasmaProfile:
    """Initial distribution f0(x, v1, v2).

    ``bump`` is the C^1 raised-cosine bump

        A cos^2(pi (x - xc) / (2 w)) cos^2(pi |v - vc| / (2 r))

    on |x - xc| < w, |v - vc| < r and zero elsewhere.
    """

    kind: str = "zero"
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _PLASMA_KINDS:
            raise ValueError(f"unknown plasma kind {self.kind!r}")
        if self.kind == "bump":
            params = {"v1_center": 0.0, "v2_center": 0.0, **self.params}
            expected = set(_PLASMA_KINDS["bump"])
            if set(params) != expected:
                raise ValueError(
                    f"plasma 'bump' takes parameters {sorted(expected)}, got {sorted(params)}"
                )
            params = {k: float(v) for k, v in params.items()}
            if params["amplitude"] < 0:
                raise ValueError("f0 must be nonnegative: bump amplitude < 0")
            if params["x_halfwidth"] <= 0 or params["v_radius"] <= 0:
                raise ValueError("bump widths must be positive")
            object.__setattr__(self, "params", params)
        elif self.params:
            raise ValueError("plasma 'zero' takes no parameters")

    @classmethod
    def zero(cls) -> PlasmaProfile:
        return cls("zero", {})

    @classmethod
    def bump(cls, amplitude, x_center, x_halfwidth, v_radius, v1_center=0.0, v2_center=0.0):
        return cls("bump", dict(amplitude=amplitude, x_center=x_center, x_halfwidth=x_halfwidth,
                                v_radius=v_radius, v1_center=v1_center, v2_center=v2_center))

    def __call__(self, x, v1, v2):
        x, v1, v2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, v1, v2)))
        if self.kind == "zero":
            return np.zeros(x.shape)
        p = self.params
        ux = (x - p["x_center"]) / p["x_halfwidth"]
        r = np.hypot(v1 - p["v1_center"], v2 - p["v2_center"]) / p["v_radius"]
        inside = (np.abs(ux) < 1.0) & (r < 1.0)
        val = p["amplitude"] * np.cos(0.5 * np.pi * ux) ** 2 * np.cos(0.5 * np.pi * r) ** 2
        return np.where(inside, val, 0.0)

    def as_array(self) -> np.ndarray:
        """Packed parameters for the compiled kernels (kind code first)."""
        if self.kind == "zero":
            return np.zeros(7)
        p = self.params
        return np.array([1.0, p["amplitude"], p["x_center"], p["x_halfwidth"], p["v_radius"],
                         p["v1_center"], p["v2_center"]])

    @property
    def x_support(self) -> tuple[float, float] | None:
        if self.kind == "zero" or self.params["amplitude"] == 0.0:
            return None
        p = self.params
        return (p["x_center"] - p["x_halfwidth"], p["x_center"] + p["x_halfwidth"])

    @property
    def v_support_radius(self) -> float:
        """Radius about the origin containing the v-support."""
        if self.x_support is None:
            return 0.0
        p = self.params
        return float(np.hypot(p["v1_center"], p["v2_center"]) + p["v_radius"])

    def sup(self) -> float:
        return 0.0 if self.x_support is None else self.params["amplitude"]

    def l1_norm(self) -> float:
        if self.x_support is None:
            return 0.0
        p = self.params
        r = p["v_radius"]
        # int cos^2 over the x window is w; radial integral gives 2 pi r^2 (1/4 - 1/pi^2)
        return p["amplitude"] * p["x_halfwidth"] * 2.0 * np.pi * r * r * (0.25 - 1.0 / np.pi ** 2)

    def energy_norm(self) -> float:
        """|| sqrt(1 + |v|^2) f0 ||_1 by adaptive quadrature in polar coordinates."""
        if self.x_support is None:
            return 0.0
        p = self.params
        r, c1, c2 = p["v_radius"], p["v1_center"], p["v2_center"]
        xfac = p["amplitude"] * p["x_halfwidth"]

        def radial(rho, phi):
            w1 = c1 + rho * np.cos(phi)
            w2 = c2 + rho * np.sin(phi)
            return np.sqrt(1.0 + w1 * w1 + w2 * w2) * np.cos(0.5 * np.pi * rho / r) ** 2 * rho

        if c1 == 0.0 and c2 == 0.0:
            val, _ = integrate.quad(lambda rho: radial(rho, 0.0), 0.0, r, epsabs=1e-14, epsrel=1e-13)
            return float(xfac * 2.0 * np.pi * val)
        val, _ = integrate.dblquad(radial, 0.0, 2.0 * np.pi, 0.0, r, epsabs=1e-13, epsrel=1e-12)
        return float(xfac * val)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> PlasmaProfile:
        unknown = set(d) - {"kind", "params"}
        if unknown:
            raise ValueError(f"unknown plasma keys {sorted(unknown)}")
        return cls(d.get("kind", "zero"), dict(d.get("params", {})))
