"""Command-line entry point: ``nlswave <command> [--config FILE] [--out DIR] ...``.

Exit codes: 0 success, 1 computational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import evolve as ev
from . import minimize as mn
from . import profile as pf
from . import spectral as sp
from .errors import NLSWaveError
from .field import ComplexField, Grid, write_field_csv
from .nonlinearity import check_conditions, from_spec

CUBIC = {"family": "combined_power", "a": 0.25, "b": 0.0, "p": 4.0, "q": 4.0}

DEFAULTS = {
    "check": {"omega_range": [0.1, 10.0], "n_samples": 64},
    "profile": {"omega": 1.0, "X": None, "n": 4096},
    "mass-curve": {"omega_min": 0.25, "omega_max": 4.0, "samples": 16, "spacing": "linear"},
    "minimize": {"lambda": 4.0, "L": 40.0, "n": 2048, "tol": 1e-8, "max_iter": 5000},
    "i-curve": {"lambdas": [1.0, 2.0, 4.0, 8.0], "L": 40.0, "n": 2048, "tol": 1e-8,
                "max_iter": 5000},
    "evolve": {"omega": 1.0, "T": 10.0, "dt": None, "L": 40.0, "n": 256, "record_every": 100,
               "perturbation": None, "eps": 0.0},
    "stability": {"lambda": 4.0, "perturbations": [["amplitude", 0.01]], "T": 50.0, "dt": None,
                  "L": 40.0, "n": 256, "record_every": 100, "K": None},
    "spectrum": {"omega": 1.0, "X": 20.0, "n": 4096, "laplacian": "spectral", "k": 3},
}
COMMON = {"nonlinearity": CUBIC}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _parse_override(item: str):
    if "=" not in item:
        raise UsageError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.strip(), val


def resolve_config(command: str, config_path=None, overrides=(), seed: int = 0) -> dict:
    cfg = copy.deepcopy(COMMON)
    cfg.update(copy.deepcopy(DEFAULTS[command]))
    supplied = {}
    if config_path is not None:
        supplied = _load_json(config_path)
        if not isinstance(supplied, dict):
            raise UsageError("config file must hold a JSON object")
    for item in overrides:
        k, v = _parse_override(item)
        supplied[k] = v
    unknown = set(supplied) - set(cfg) - {"command", "seed"}
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg.update({k: v for k, v in supplied.items() if k not in ("command", "seed")})
    nl = cfg["nonlinearity"]
    if isinstance(nl, str):
        nl = _load_json(nl)
    try:
        cfg["nonlinearity"] = from_spec(nl).to_spec()
    except (ValueError, TypeError) as exc:
        raise UsageError(f"malformed nonlinearity spec: {exc}") from None
    cfg["command"] = command
    cfg["seed"] = seed
    _validate(cfg)
    return cfg


def _positive(cfg, *keys):
    for k in keys:
        v = cfg[k]
        if v is not None and not (isinstance(v, (int, float)) and v > 0):
            raise UsageError(f"{k} must be a positive number, got {v!r}")


def _grid_n(cfg, key="n"):
    n = cfg[key]
    if not isinstance(n, int) or n < 16 or n & (n - 1):
        raise UsageError(f"{key} must be a power of two >= 16, got {n!r}")


def _validate(cfg):
    c = cfg["command"]
    if c == "check":
        lo, hi = cfg["omega_range"]
        if not 0 < lo < hi:
            raise UsageError("omega_range must satisfy 0 < lo < hi")
    elif c == "profile":
        _positive(cfg, "omega", "X")
        _grid_n(cfg)
    elif c == "mass-curve":
        _positive(cfg, "omega_min", "omega_max")
        if not cfg["omega_min"] < cfg["omega_max"] or int(cfg["samples"]) < 1:
            raise UsageError("empty omega range")
        if cfg["spacing"] not in ("linear", "log"):
            raise UsageError("spacing must be linear or log")
    elif c in ("minimize", "i-curve"):
        _positive(cfg, "L", "tol")
        _grid_n(cfg)
        lams = [cfg["lambda"]] if c == "minimize" else cfg["lambdas"]
        if not lams or any(not isinstance(v, (int, float)) or v <= 0 for v in lams):
            raise UsageError("masses must be positive numbers")
        if c == "i-curve" and sorted(lams) != list(lams):
            raise UsageError("lambdas must be ascending")
    elif c == "evolve":
        _positive(cfg, "omega", "T", "dt", "L")
        _grid_n(cfg)
        if cfg["perturbation"] not in (None, *ev.PERTURBATION_KINDS):
            raise UsageError(f"perturbation must be one of {ev.PERTURBATION_KINDS}")
    elif c == "stability":
        _positive(cfg, "lambda", "T", "dt", "L", "K")
        _grid_n(cfg)
        for item in cfg["perturbations"]:
            if (not isinstance(item, (list, tuple)) or len(item) != 2
                    or item[0] not in ev.PERTURBATION_KINDS):
                raise UsageError(f"bad perturbation entry {item!r}")
    elif c == "spectrum":
        _positive(cfg, "omega", "X")
        _grid_n(cfg)
        if cfg["laplacian"] not in ("spectral", "fd2"):
            raise UsageError("laplacian must be spectral or fd2")


# --------------------------------------------------------------------------
# commands; each returns (exit code, summary dict) and writes its artifacts


def _write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_check(cfg, out: Path, jobs: int):
    nl = from_spec(cfg["nonlinearity"])
    rep = check_conditions(nl, tuple(cfg["omega_range"]), int(cfg["n_samples"]))
    _write_json(out / "conditions.json", rep.to_dict())
    return (0 if rep.passed() else 1), {k: v.verdict for k, v in rep.verdicts.items()}


def cmd_profile(cfg, out, jobs):
    nl = from_spec(cfg["nonlinearity"])
    pr = pf.build_profile(nl, cfg["omega"], X=cfg["X"], n=cfg["n"])
    pr.to_csv(out / "profile.csv")
    summary = {k: v for k, v in pr.to_dict().items() if k not in ("x", "R", "dR")}
    _write_json(out / "profile.json", summary)
    return 0, summary


def cmd_mass_curve(cfg, out, jobs):
    nl = from_spec(cfg["nonlinearity"])
    lo, hi, m = cfg["omega_min"], cfg["omega_max"], int(cfg["samples"])
    oms = np.geomspace(lo, hi, m) if cfg["spacing"] == "log" else np.linspace(lo, hi, m)
    curve = pf.mass_curve(nl, oms, jobs=jobs)
    curve.to_csv(out / "mass_curve.csv")
    ok = bool(np.all(curve.dlam > 0))
    return 0, {"samples": m, "dlambda_positive": ok}


def _min_opts(cfg):
    return mn.MinimizeOptions(tol=cfg["tol"], max_iter=int(cfg["max_iter"]))


def cmd_minimize(cfg, out, jobs):
    nl = from_spec(cfg["nonlinearity"])
    grid = Grid(cfg["L"], cfg["n"])
    res = mn.minimize_energy(nl, cfg["lambda"], grid, _min_opts(cfg))
    summary = res.to_dict()
    summary["identity_defect"] = mn.existence_identity_check(res, nl)
    _write_json(out / "minimizer.json", summary)
    write_field_csv(out / "minimizer.csv", res.u)
    return (0 if res.converged else 1), summary


def cmd_i_curve(cfg, out, jobs):
    nl = from_spec(cfg["nonlinearity"])
    grid = Grid(cfg["L"], cfg["n"])
    curve = mn.I_curve(nl, cfg["lambdas"], grid, _min_opts(cfg))
    curve.to_csv(out / "i_curve.csv")
    return 0, {"lambda_star_estimate": curve.lambda_star,
               "statuses": [p.status for p in curve.points]}


def cmd_evolve(cfg, out, jobs):
    nl = from_spec(cfg["nonlinearity"])
    grid = Grid(cfg["L"], cfg["n"])
    pr = pf.build_profile(nl, cfg["omega"], X=0.5 * grid.L, n=grid.n)
    u0 = pr.R.astype(complex)
    if cfg["perturbation"] is not None:
        u0 = ev.perturb(pr.R, grid, cfg["perturbation"], cfg["eps"],
                        np.random.default_rng(cfg["seed"]))
    dt = cfg["dt"] or ev.default_dt(grid)
    ecfg = ev.EvolveConfig(dt, cfg["T"], grid, nl, int(cfg["record_every"]))
    try:
        trace = ev.evolve(ComplexField(grid, u0), ecfg, reference=pr)
    except NLSWaveError as exc:
        if getattr(exc, "trace", None) is not None:
            exc.trace.to_csv(out / "trace.csv")
        raise
    trace.to_csv(out / "trace.csv")
    summary = {"dt": dt, "steps": ecfg.n_steps, "mass_drift": trace.mass_drift(),
               "energy_drift": trace.energy_drift(), "max_distance": float(max(trace.dist))}
    _write_json(out / "evolve.json", summary)
    return 0, summary


def cmd_stability(cfg, out, jobs):
    nl = from_spec(cfg["nonlinearity"])
    grid = Grid(cfg["L"], cfg["n"])
    rep = ev.stability_experiment(nl, cfg["lambda"], [tuple(p) for p in cfg["perturbations"]],
                                  cfg["T"], grid, dt=cfg["dt"],
                                  record_every=int(cfg["record_every"]), K=cfg["K"],
                                  seed=cfg["seed"], jobs=jobs)
    summary = rep.to_dict()
    _write_json(out / "stability.json", summary)
    bad = any(o.stable is False for o in rep.outcomes)
    return (1 if bad else 0), summary


def cmd_spectrum(cfg, out, jobs):
    nl = from_spec(cfg["nonlinearity"])
    pr = pf.build_profile(nl, cfg["omega"], X=cfg["X"], n=cfg["n"])
    op = sp.assemble(pr, nl, cfg["laplacian"])
    rep = sp.nondegeneracy_certificate(op, pr, nl, k=int(cfg["k"]))
    summary = rep.to_dict()
    _write_json(out / "spectrum.json", summary)
    return 0, summary


COMMANDS = {"check": cmd_check, "profile": cmd_profile, "mass-curve": cmd_mass_curve,
            "minimize": cmd_minimize, "i-curve": cmd_i_curve, "evolve": cmd_evolve,
            "stability": cmd_stability, "spectrum": cmd_spectrum}


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlswave",
                                 description="Ground states and solitary waves of 1-D NLS.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config key; VALUE is parsed as JSON when possible")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = resolve_config(args.command, args.config, args.set, args.seed)
    except UsageError as exc:
        print(f"nlswave: usage error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": args.command, "config": cfg, "jobs": args.jobs,
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    _write_json(out / "manifest.json", manifest)
    try:
        code, summary = COMMANDS[args.command](cfg, out, args.jobs)
    except (NLSWaveError, ValueError, ArithmeticError) as exc:
        print(f"nlswave: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True, default=str))
    return code


if __name__ == "__main__":
    sys.exit(main())
