"""Command-line entry points: run, constants, check.

Exit codes: 0 ok, 1 check failure, 2 invalid config, 3 runtime violation,
4 missing or corrupt artifacts.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .characteristics import ConfinementError
from .core import ConfigError, apply_overrides, config_from_dict, validate_config
from .diagnostics import check_all, theoretical_constants
from .driver import PicardDivergence, run as run_solver
from .io import ArtifactError, config_hash, load_run, write_run

__all__ = ["main", "cmd_run", "cmd_constants", "cmd_check"]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("rvm1d")

# relative tolerance when comparing recomputed diagnostics with stored ones
CHECK_RTOL = 1e-9


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(config_path, overrides):
    try:
        with open(config_path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    cfg = config_from_dict(apply_overrides(raw, list(overrides or [])))
    return validate_config(cfg)


def cmd_run(config_path, overrides=(), out_dir=None, quiet: bool = False) -> int:
    try:
        cfg = _load(config_path, overrides)
    except ConfigError as exc:
        _err(f"invalid config: {exc}")
        return EXIT_CONFIG
    out = Path(out_dir or cfg.output.directory)

    def progress(n, total):
        if not quiet and (n % max(1, total // 10) == 0 or n == total):
            print(f"step {n}/{total}", file=sys.stderr)

    try:
        result = run_solver(cfg, progress=progress) if cfg.solver_mode == "march" \
            else run_solver(cfg)
    except ConfinementError as exc:
        _err(f"runtime violation at step {getattr(exc, 'step', '?')}: {exc}")
        return EXIT_RUNTIME
    except PicardDivergence as exc:
        _err(f"runtime violation: {exc}")
        return EXIT_RUNTIME
    try:
        manifest = write_run(result, out)
    except OSError as exc:
        _err(f"cannot write artifacts to {out}: {exc}")
        return EXIT_IO
    summary = manifest["summary"]
    if not quiet:
        print(json.dumps({"out": str(out), "constants": manifest["constants"],
                          "summary": summary}, indent=1))
    if summary["n_violations"]:
        first = result.violations[0]
        _err(f"runtime violation at step {first[0]}: {first[1]} (margin {first[2]:.3g})")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_constants(config_path, overrides=()) -> int:
    try:
        cfg = _load(config_path, overrides)
    except ConfigError as exc:
        _err(f"invalid config: {exc}")
        return EXIT_CONFIG
    const = theoretical_constants(cfg)
    print(json.dumps({k: const.as_dict()[k] for k in ("C1", "C2", "C0", "theta0", "theta1", "R")},
                     indent=1))
    return EXIT_OK


def _close(a: float, b: float) -> bool:
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return abs(a - b) <= CHECK_RTOL * max(1.0, abs(a), abs(b))


def recheck(run_dir) -> list[str]:
    """Names of stored quantities that disagree with a recomputation from the snapshots."""
    stored = load_run(run_dir)
    man = stored.manifest
    if config_hash(stored.cfg) != man.get("config_hash"):
        raise ArtifactError("manifest config hash does not match its config")
    rows = stored.diag_rows
    if len(rows) != man["summary"]["n_steps"] + 1:
        raise ArtifactError("diagnostics series length does not match the manifest")
    failures = []
    e0 = rows[0]["energy"]
    n_viol = 0
    for n, row in enumerate(rows):
        flux = stored.flux_accum(n)
        if not _close(flux, row["flux_accum"]):
            failures.append(f"step {n}: flux_accum")
        if n in stored.f_states and n in stored.field_states:
            rep = check_all(stored, n)
            lo, hi = rep.sigma if rep.sigma is not None else (math.nan, math.nan)
            fresh = {"t": rep.t, "charge": rep.total_charge, "energy": rep.total_energy,
                     "maxf": rep.max_f, "e1max": rep.e1_max, "e2max": rep.e2_max,
                     "bmax": rep.b_max, "p_radius": rep.p_radius, "sigma_lo": lo,
                     "sigma_hi": hi, "n_violations": float(len(rep.violations))}
            failures += [f"step {n}: {k}" for k, v in fresh.items() if not _close(v, row[k])]
        else:
            # no snapshot: the row must at least satisfy the stored energy balance
            defect = abs(row["energy"] - e0 - row["flux_accum"])
            if defect > man["summary"]["max_energy_defect"] * (1 + CHECK_RTOL) + 1e-14:
                failures.append(f"step {n}: energy_balance")
        n_viol += int(row["n_violations"])
    if n_viol != man["summary"]["n_violations"]:
        failures.append("n_violations")
    return failures


def cmd_check(run_dir) -> int:
    try:
        failures = recheck(run_dir)
    except ArtifactError as exc:
        _err(f"corrupt run directory: {exc}")
        return EXIT_IO
    if failures:
        for f in failures:
            _err(f"check failed: {f}")
        return EXIT_CHECK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rvm1d", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "constants"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--set", action="append", default=[], metavar="K=V", dest="overrides",
                       help="dotted-path override, repeatable, last one wins")
        s.add_argument("--quiet", action="store_true")
        if name == "run":
            s.add_argument("--out", metavar="DIR")
    c = sub.add_parser("check")
    c.add_argument("run_dir", nargs="?", metavar="DIR")
    c.add_argument("--out", metavar="DIR", help="same as the positional run directory")
    c.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.overrides, args.out, args.quiet)
    if args.command == "constants":
        return cmd_constants(args.config, args.overrides)
    run_dir = args.run_dir or args.out
    if run_dir is None:
        _err("check needs a run directory")
        return EXIT_IO
    return cmd_check(run_dir)


if __name__ == "__main__":
    sys.exit(main())
