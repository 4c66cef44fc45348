"""Run artifacts on disk: snapshots, diagnostics series, manifest, and offline reload."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .characteristics import ConfinementError, PhasePoint, p_invariant, trace_trajectory
from .core import PhaseSpaceGrid, SimConfig, config_from_dict, config_to_dict
from .diagnostics import (
    DiagnosticsReport,
    TheoreticalConstants,
    accumulated_flux,
    theoretical_constants,
)
from .fields import FieldState
from .vlasov import DistributionState, kinetic_moments, moments

__all__ = [
    "ArtifactError",
    "FMT",
    "config_hash",
    "write_run",
    "load_run",
    "read_field_csv",
    "read_distribution",
    "DIAG_COLUMNS",
]

FMT = "%.17g"
MANIFEST = "manifest.json"
DIAGNOSTICS = "diagnostics.csv"
VIOLATIONS = "violations.json"
BOUNDARY = "boundary.csv"
TRAJECTORIES = "trajectories.csv"
DIAG_COLUMNS = ("t", "charge", "energy", "flux_accum", "maxf", "e1max", "e2max", "bmax",
                "p_radius", "sigma_lo", "sigma_hi", "n_violations")


class ArtifactError(RuntimeError):
    """Missing, unreadable or checksum-mismatched run artifact."""


def _g(x: float) -> str:
    return FMT % x


def config_hash(cfg: SimConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


# ----------------------------------------------------------------------------
# snapshots

def field_csv_name(step: int, t: float) -> str:
    return f"fields_{step:06d}_t{t:.6f}.csv"


def write_field_csv(path: Path, x: np.ndarray, fs: FieldState) -> None:
    # the transported invariants ride along so the state reloads bit for bit
    data = np.column_stack([x, fs.e1, fs.e2, fs.b, fs.k_plus, fs.k_minus])
    np.savetxt(path, data, fmt=FMT, delimiter=",",
               header=f"t={_g(fs.t)}\nx,E1,E2,B,k_plus,k_minus")


def read_field_csv(path: Path) -> FieldState:
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
        t = float(first.split("=", 1)[1])
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError, IndexError) as exc:
        raise ArtifactError(f"unreadable field snapshot {path.name}: {exc}") from exc
    if data.shape[1] >= 6:
        return FieldState(t=t, e1=data[:, 1].copy(), k_plus=data[:, 4].copy(),
                          k_minus=data[:, 5].copy())
    return FieldState.from_e2_b(t, data[:, 1], data[:, 2], data[:, 3])


def write_distribution(stem: Path, f: DistributionState, grid: PhaseSpaceGrid) -> list[Path]:
    """Row-major little-endian float64 values plus a JSON sidecar."""
    binp = stem.with_suffix(".bin")
    np.ascontiguousarray(f.values, dtype="<f8").tofile(binp)
    meta = {
        "t": f.t,
        "shape": list(f.values.shape),
        "dtype": "<f8",
        "order": "C",
        "axes": ["x", "v1", "v2"],
        "x_range": [0.0, 1.0],
        "v_range": [float(grid.v[0]), float(grid.v[-1])],
        "support_x": list(f.support_x) if f.support_x is not None else None,
        "support_v_radius": f.support_v_radius,
    }
    side = stem.with_suffix(".json")
    _write_text(side, json.dumps(meta, indent=1))
    return [binp, side]


def read_distribution(stem: Path) -> DistributionState:
    try:
        meta = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
        raw = np.fromfile(stem.with_suffix(".bin"), dtype=meta["dtype"])
        values = raw.reshape(meta["shape"]).astype(float)
    except (OSError, ValueError, KeyError) as exc:
        raise ArtifactError(f"unreadable distribution snapshot {stem.name}: {exc}") from exc
    sx = meta.get("support_x")
    return DistributionState(float(meta["t"]), values, tuple(sx) if sx else None,
                             float(meta.get("support_v_radius", 0.0)))


# ----------------------------------------------------------------------------
# writing a run

def _diag_row(rep: DiagnosticsReport) -> list[str]:
    lo, hi = rep.sigma if rep.sigma is not None else (float("nan"), float("nan"))
    vals = [rep.t, rep.total_charge, rep.total_energy, rep.boundary_flux_accum, rep.max_f,
            rep.e1_max, rep.e2_max, rep.b_max, rep.p_radius, lo, hi]
    return [_g(v) for v in vals] + [str(len(rep.violations))]


def _trajectory_rows(run, n_traj: int = 16) -> list[list[str]]:
    """Forward characteristics from a deterministic sample of the initial support."""
    cfg = run.cfg
    f0 = cfg.initial_data.f0
    if f0.x_support is None:
        return []
    a, b = f0.x_support
    r = f0.v_support_radius
    sampler = run.sampler()
    rows = []
    for k in range(n_traj):
        x = a + (b - a) * (k + 0.5) / n_traj
        ang = 2.0 * np.pi * k / n_traj
        p = PhasePoint(x, 0.9 * r * np.cos(ang), 0.9 * r * np.sin(ang))
        try:
            path = trace_trajectory(0.0, p, sampler, cfg.t_final, cfg.dt)
        except ConfinementError as exc:
            path = exc.trajectory
        for s, xx, v1, v2 in path:
            pinv = p_invariant(float(s), PhasePoint(float(xx), float(v1), float(v2)), sampler)
            rows.append([str(k)] + [_g(float(u)) for u in (s, xx, v1, v2, pinv)])
    return rows


def write_run(run, out_dir, formats=None, emit_trajectories: bool | None = None) -> dict:
    """Write snapshots, diagnostics and manifest for a finished run; returns the manifest."""
    cfg = run.cfg
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = tuple(formats or cfg.output.formats)
    emit = cfg.output.emit_trajectories if emit_trajectories is None else emit_trajectories
    x = run.grid.x
    snap_files: list[Path] = []

    stored = sorted(run.f_states)
    if "csv" in formats:
        (out / "fields").mkdir(exist_ok=True)
        for n in stored:
            fs = run.field_states[n]
            p = out / "fields" / field_csv_name(n, fs.t)
            write_field_csv(p, x, fs)
            snap_files.append(p)
    if "binary" in formats:
        (out / "f").mkdir(exist_ok=True)
        for n in stored:
            snap_files += write_distribution(out / "f" / f"f_{n:06d}", run.f_states[n], run.grid)

    with open(out / BOUNDARY, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E2_left", "B_left", "E2_right", "B_right"])
        for fs in run.field_states:
            e2, b = fs.e2, fs.b
            w.writerow([_g(v) for v in (fs.t, e2[0], b[0], e2[-1], b[-1])])
    snap_files.append(out / BOUNDARY)

    with open(out / DIAGNOSTICS, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(DIAG_COLUMNS)
        for rep in run.diagnostics:
            w.writerow(_diag_row(rep))

    viol = [{"step": n, "t": rep.t, "check": name, "margin": m}
            for n, rep in enumerate(run.diagnostics) for name, m in rep.violations]
    _write_text(out / VIOLATIONS, json.dumps(viol, indent=1))

    if emit:
        with open(out / TRAJECTORIES, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "s", "X", "V1", "V2", "p"])
            w.writerows(_trajectory_rows(run))

    e0 = run.diagnostics[0].total_energy
    defects = [abs(r.total_energy - e0 - r.boundary_flux_accum) for r in run.diagnostics]
    manifest = {
        "version": __version__,
        "config": config_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "solver_mode": cfg.solver_mode,
        "constants": run.constants.as_dict(),
        "summary": {
            "n_steps": run.n_steps,
            "t_final": run.field_states[-1].t,
            "n_violations": len(viol),
            "passed": not viol,
            "first_violation_step": viol[0]["step"] if viol else None,
            "max_energy_defect": max(defects),
            "f0_grid_max": run.f0_grid_max,
            "support_tol": run.support_tol,
            "picard_residuals": list(run.residuals),
        },
        "snapshot_steps": stored,
        "files": {str(p.relative_to(out)): _sha256(p) for p in snap_files},
    }
    _write_text(out / MANIFEST, json.dumps(manifest, indent=1, allow_nan=True))
    return manifest


# ----------------------------------------------------------------------------
# reloading

@dataclass
class StoredRun:
    """A run rebuilt from its artifacts; duck-types SimulationRun for the checks."""

    cfg: SimConfig
    grid: PhaseSpaceGrid
    constants: TheoreticalConstants
    manifest: dict
    f_states: dict = field(default_factory=dict)
    field_states: dict = field(default_factory=dict)
    current_history: dict = field(default_factory=dict)
    kinetic_history: dict = field(default_factory=dict)
    boundary: np.ndarray | None = None
    diag_rows: list[dict] = field(default_factory=list)
    f0_grid_max: float = 0.0
    support_tol: float = 0.0

    def f_at(self, step: int):
        return self.f_states.get(step)

    def flux_accum(self, step: int) -> float:
        b = self.boundary[: step + 1]
        return accumulated_flux(b[:, 1] * b[:, 2] - b[:, 3] * b[:, 4], self.cfg.dt)


def _read_manifest(d: Path) -> dict:
    try:
        return json.loads((d / MANIFEST).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ArtifactError(f"missing or corrupt manifest in {d}: {exc}") from exc


def verify_checksums(d: Path, manifest: dict) -> None:
    for rel, digest in manifest.get("files", {}).items():
        p = d / rel
        if not p.is_file():
            raise ArtifactError(f"missing snapshot {rel}")
        if _sha256(p) != digest:
            raise ArtifactError(f"checksum mismatch for {rel}")


def load_run(run_dir) -> StoredRun:
    """Reload a run directory, verifying snapshot checksums first."""
    d = Path(run_dir)
    man = _read_manifest(d)
    verify_checksums(d, man)
    try:
        cfg = config_from_dict(man["config"])
    except Exception as exc:  # noqa: BLE001 - any decode failure means a corrupt manifest
        raise ArtifactError(f"manifest config unreadable: {exc}") from exc
    grid = PhaseSpaceGrid.from_config(cfg)
    run = StoredRun(cfg=cfg, grid=grid, constants=theoretical_constants(cfg), manifest=man,
                    f0_grid_max=float(man["summary"]["f0_grid_max"]),
                    support_tol=float(man["summary"]["support_tol"]))
    try:
        run.boundary = np.loadtxt(d / BOUNDARY, delimiter=",", skiprows=1, ndmin=2)
        with open(d / DIAGNOSTICS, newline="", encoding="utf-8") as fh:
            run.diag_rows = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    except (OSError, ValueError) as exc:
        raise ArtifactError(f"unreadable diagnostics series: {exc}") from exc
    for rel in man["files"]:
        p = d / rel
        if rel.startswith("fields/"):
            step = int(p.stem.split("_")[1])
            run.field_states[step] = read_field_csv(p)
        elif rel.startswith("f/") and rel.endswith(".bin"):
            step = int(p.stem.split("_")[1])
            f = read_distribution(p.with_suffix(""))
            run.f_states[step] = f
            run.current_history[step] = moments(f, grid)
            run.kinetic_history[step] = kinetic_moments(f, grid)
    return run
