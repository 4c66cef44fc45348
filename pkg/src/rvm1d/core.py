"""Configuration, external potential and phase-space grid."""
from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .profiles import PlasmaProfile, Profile, profile_sup

__all__ = [
    "ConfigError",
    "ExternalPotential",
    "InitialDataSpec",
    "BoundaryDataSpec",
    "OutputSpec",
    "AllowanceSpec",
    "SimConfig",
    "PhaseSpaceGrid",
    "eval_potential",
    "dist_to_boundary",
    "validate_config",
    "config_to_dict",
    "config_from_dict",
    "load_config",
    "apply_overrides",
]


class ConfigError(ValueError):
    """A configuration breaks one of the well-posedness hypotheses."""


def dist_to_boundary(x):
    """Distance from x to the boundary of the unit interval."""
    x = np.asarray(x, dtype=float)
    d = np.minimum(x, 1.0 - x)
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class ExternalPotential:
    """Confining potential psi_ext with B_ext = d psi_ext / dx.

    ``form="inverse_distance"`` is psi_ext = c0 / (x (1 - x))**gamma, which
    satisfies the blow-up lower bound because x (1 - x) <= dist(x, {0, 1}).
    ``form="none"`` switches the external field off (free plasma).
    """

    form: str = "inverse_distance"
    c0: float = 1.0
    gamma: float = 1.0
    enforce_blowup: bool = True

    def __post_init__(self):
        if self.form not in ("inverse_distance", "none"):
            raise ConfigError(f"unknown potential form {self.form!r}")
        if not (self.c0 > 0 and self.gamma > 0):
            raise ConfigError("blow-up condition needs c0 > 0 and gamma > 0")

    @property
    def kind_code(self) -> int:
        return 1 if self.form == "inverse_distance" else 0

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        if self.form == "none":
            return np.zeros_like(x)
        return self.c0 / (x * (1.0 - x)) ** self.gamma

    def b_ext(self, x):
        x = np.asarray(x, dtype=float)
        if self.form == "none":
            return np.zeros_like(x)
        q = x * (1.0 - x)
        return self.gamma * self.c0 * (2.0 * x - 1.0) / q ** (self.gamma + 1.0)

    def sup_psi(self, a: float, b: float) -> float:
        """Sup of |psi_ext| over [a, b] (0 < a <= b < 1)."""
        if self.form == "none":
            return 0.0
        # psi_ext is symmetric about 1/2 and decreasing towards it
        d = min(a, 1.0 - b)
        return float(self.c0 / (d * (1.0 - d)) ** self.gamma)

    def blowup_margin(self, x):
        """|psi| d^gamma + d^gamma / c0 - c0, nonnegative iff the blow-up bound holds at x."""
        d = np.asarray(dist_to_boundary(x), dtype=float) ** self.gamma
        return np.abs(self.psi(x)) * d + d / self.c0 - self.c0

    def as_array(self) -> np.ndarray:
        return np.array([float(self.kind_code), self.c0, self.gamma])


def eval_potential(pot: ExternalPotential, x: float) -> tuple[float, float]:
    """(psi_ext(x), B_ext(x)) for 0 < x < 1."""
    if not 0.0 < x < 1.0:
        raise ValueError(f"potential is infinite at the boundary; x={x!r} not in (0, 1)")
    return float(pot.psi(x)), float(pot.b_ext(x))


@dataclass(frozen=True)
class InitialDataSpec:
    f0: PlasmaProfile = field(default_factory=PlasmaProfile.zero)
    eps0: float = 0.25
    k0: float = 1.0
    E2_0: Profile = field(default_factory=Profile.zero)
    B_0: Profile = field(default_factory=Profile.zero)


@dataclass(frozen=True)
class BoundaryDataSpec:
    E2_b_left: Profile = field(default_factory=Profile.zero)
    E2_b_right: Profile = field(default_factory=Profile.zero)
    B_b_left: Profile = field(default_factory=Profile.zero)
    B_b_right: Profile = field(default_factory=Profile.zero)

    def k_plus_left(self, t):
        """Incoming right-moving invariant E2 + B at x = 0."""
        return self.E2_b_left(t) + self.B_b_left(t)

    def k_minus_right(self, t):
        """Incoming left-moving invariant E2 - B at x = 1."""
        return self.E2_b_right(t) - self.B_b_right(t)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "rvm_out"
    snapshot_stride: int = 1
    formats: tuple[str, ...] = ("csv", "json", "binary")
    emit_trajectories: bool = False


@dataclass(frozen=True)
class AllowanceSpec:
    """Discretization allowances C in the bound checks (slack C * dx**2)."""

    field_c: float = 4.0
    charge_c: float = 4.0
    support_cells: float = 2.0
    # values below support_tol_c * dv**2 * max f0 count as zero in the support checks
    support_tol_c: float = 1.0


@dataclass(frozen=True)
class SimConfig:
    nx: int = 64
    nv: int = 32
    v_max: float = 2.0
    t_final: float = 0.5
    lam: float = 0.0
    potential: ExternalPotential = field(default_factory=ExternalPotential)
    initial_data: InitialDataSpec = field(default_factory=InitialDataSpec)
    boundary_data: BoundaryDataSpec = field(default_factory=BoundaryDataSpec)
    solver_mode: str = "march"
    picard_tol: float = 1e-10
    picard_max_iter: int = 30
    output: OutputSpec = field(default_factory=OutputSpec)
    allowance: AllowanceSpec = field(default_factory=AllowanceSpec)

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dt(self) -> float:
        return self.dx

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class PhaseSpaceGrid:
    x: np.ndarray
    v: np.ndarray
    dx: float
    dv: float

    @classmethod
    def from_config(cls, cfg: SimConfig) -> PhaseSpaceGrid:
        x = np.linspace(0.0, 1.0, cfg.nx + 1)
        v = np.linspace(-cfg.v_max, cfg.v_max, cfg.nv + 1)
        return cls(x=x, v=v, dx=1.0 / cfg.nx, dv=2.0 * cfg.v_max / cfg.nv)

    @property
    def nx(self) -> int:
        return self.x.size - 1

    @property
    def nv(self) -> int:
        return self.v.size - 1

    @property
    def v_max(self) -> float:
        return float(self.v[-1])

    def v_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.v, self.v, indexing="ij")

    def x_weights(self) -> np.ndarray:
        w = np.full(self.x.size, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def v_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights on the (v1, v2) grid."""
        w = np.full(self.v.size, self.dv)
        w[0] = w[-1] = 0.5 * self.dv
        return np.outer(w, w)


# ----------------------------------------------------------------------------
# validation

def _check(cond: bool, errors: list[str], msg: str) -> None:
    if not cond:
        errors.append(msg)


def validate_config(cfg: SimConfig) -> SimConfig:
    """Check every hypothesis the solver relies on; raise ConfigError listing all failures."""
    errors: list[str] = []
    _check(isinstance(cfg.nx, int) and cfg.nx > 0, errors, "nx must be a positive integer")
    _check(isinstance(cfg.nv, int) and cfg.nv > 0, errors, "nv must be a positive integer")
    _check(cfg.v_max > 0, errors, "v_max must be positive")
    _check(cfg.t_final > 0, errors, "t_final must be positive")
    _check(cfg.solver_mode in ("march", "picard"), errors,
           f"solver_mode must be 'march' or 'picard', got {cfg.solver_mode!r}")
    _check(cfg.picard_tol > 0, errors, "picard_tol must be positive")
    _check(isinstance(cfg.picard_max_iter, int) and cfg.picard_max_iter > 0, errors,
           "picard_max_iter must be a positive integer")
    _check(cfg.output.snapshot_stride >= 1, errors, "snapshot_stride must be >= 1")
    _check(set(cfg.output.formats) <= {"csv", "json", "binary"}, errors,
           "output formats must be a subset of {csv, json, binary}")
    if errors:
        raise ConfigError("; ".join(errors))

    steps = cfg.t_final / cfg.dt
    _check(abs(steps - round(steps)) < 1e-9 * max(1.0, steps), errors,
           f"t_final={cfg.t_final} is not an integer multiple of dt=dx={cfg.dt}")

    init = cfg.initial_data
    _check(0.0 < init.eps0 < 0.5, errors, "eps0 must lie in (0, 1/2)")
    _check(init.k0 > 0, errors, "k0 must be positive")
    supp = init.f0.x_support
    if supp is not None:
        lo, hi = supp
        _check(lo >= init.eps0 - 1e-14 and hi <= 1.0 - init.eps0 + 1e-14, errors,
               f"f0 x-support [{lo:.6g}, {hi:.6g}] violates spt(f0) in [eps0, 1 - eps0] "
               f"with eps0={init.eps0}")
        _check(init.f0.v_support_radius <= init.k0 + 1e-14, errors,
               f"f0 v-support radius {init.f0.v_support_radius:.6g} exceeds k0={init.k0}")

    pot = cfg.potential
    if pot.enforce_blowup:
        _check(pot.form != "none", errors,
               "blow-up condition |psi_ext| >= c0/dist^gamma - 1/c0 cannot hold with "
               "form='none'; set enforce_blowup=false for a free plasma")
        if pot.form != "none":
            x = np.linspace(0.0, 1.0, cfg.nx + 1)[1:-1]
            margin = pot.blowup_margin(x)
            _check(bool(np.all(margin >= -1e-12 * np.abs(pot.psi(x)))), errors,
                   "psi_ext violates the blow-up condition at a grid point")

    b = cfg.boundary_data
    ts = np.linspace(0.0, cfg.t_final, 257)
    for name in ("E2_b_left", "E2_b_right", "B_b_left", "B_b_right"):
        _check(bool(np.all(np.isfinite(getattr(b, name)(ts)))), errors,
               f"boundary datum {name} is not finite on [0, t_final]")
    if errors:
        raise ConfigError("; ".join(errors))
    mismatch = corner_mismatch(cfg)
    if mismatch > 1e-12:
        warnings.warn(f"initial and boundary field data disagree at a corner by {mismatch:.3g}",
                      stacklevel=2)

    # support growth: the v grid has to contain k0 + C2 T (nothing to contain when f0 = 0)
    if supp is None:
        return cfg
    from .diagnostics import theoretical_constants

    const = theoretical_constants(cfg)
    need = init.k0 + const.C2 * cfg.t_final
    if cfg.v_max < need * (1.0 - 1e-12):
        raise ConfigError(
            f"v_max={cfg.v_max:.6g} does not contain the momentum support bound "
            f"k0 + C2*T = {need:.6g}; required v_max >= {need:.6g}"
        )
    return cfg


def corner_mismatch(cfg: SimConfig) -> float:
    """Largest disagreement between initial and boundary data at the corners t = 0."""
    i, b = cfg.initial_data, cfg.boundary_data
    return float(max(
        abs(i.E2_0(0.0) - b.E2_b_left(0.0)), abs(i.B_0(0.0) - b.B_b_left(0.0)),
        abs(i.E2_0(1.0) - b.E2_b_right(0.0)), abs(i.B_0(1.0) - b.B_b_right(0.0)),
    ))


# ----------------------------------------------------------------------------
# JSON mirror of SimConfig

_KEY_ALIASES = {"lam": "lambda"}
_KEY_UNALIASES = {v: k for k, v in _KEY_ALIASES.items()}


def _encode(obj: Any) -> Any:
    if isinstance(obj, (Profile, PlasmaProfile)):
        return obj.to_dict()
    if dataclasses.is_dataclass(obj):
        return {_KEY_ALIASES.get(f.name, f.name): _encode(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_encode(o) for o in obj]
    return obj


def config_to_dict(cfg: SimConfig) -> dict:
    return _encode(cfg)


_NESTED = {
    SimConfig: {"potential": ExternalPotential, "initial_data": InitialDataSpec,
                "boundary_data": BoundaryDataSpec, "output": OutputSpec,
                "allowance": AllowanceSpec},
}


def _decode(cls, d: dict, path: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{path or 'config'} must be a JSON object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in d.items():
        name = _KEY_UNALIASES.get(key, key)
        if name not in names:
            raise ConfigError(f"unknown config key {path + key!r}")
        sub = _NESTED.get(cls, {}).get(name)
        if sub is not None:
            kwargs[name] = _decode(sub, value, f"{path}{key}.")
        elif cls is InitialDataSpec and name == "f0":
            kwargs[name] = _wrap(PlasmaProfile.from_dict, value, path + key)
        elif cls in (InitialDataSpec, BoundaryDataSpec) and name not in ("eps0", "k0"):
            kwargs[name] = _wrap(Profile.from_dict, value, path + key)
        elif cls is OutputSpec and name == "formats":
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def _wrap(fn, value, where):
    try:
        return fn(value)
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(d: dict) -> SimConfig:
    return _decode(SimConfig, d, "")


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``key.sub=value`` overrides (JSON-parsed values, last one wins)."""
    out = json.loads(json.dumps(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object value")
        node[parts[-1]] = value
    return out


def sup_data_norms(cfg: SimConfig) -> dict[str, float]:
    """Sup norms of the field data from their closed forms (grid independent)."""
    from .profiles import product_sup

    i, b, T = cfg.initial_data, cfg.boundary_data, cfg.t_final
    return {
        "E2_0": profile_sup(i.E2_0, 0.0, 1.0),
        "B_0": profile_sup(i.B_0, 0.0, 1.0),
        "E2_b": max(profile_sup(b.E2_b_left, 0.0, T), profile_sup(b.E2_b_right, 0.0, T)),
        "B_b": max(profile_sup(b.B_b_left, 0.0, T), profile_sup(b.B_b_right, 0.0, T)),
        "E2B_b": max(product_sup(b.E2_b_left, b.B_b_left, 0.0, T),
                     product_sup(b.E2_b_right, b.B_b_right, 0.0, T)),
    }
