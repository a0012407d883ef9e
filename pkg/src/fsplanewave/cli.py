"""Command-line interface: ``fsplanewave {solve,sweep,audit,fsmap-check}``.

Configuration is one JSON document (``--config``). Values are resolved
in this order, later entries winning: built-in defaults, the config file,
``--set KEY=VALUE`` overrides (VALUE parsed as JSON, else kept as a
string), then the dedicated flags ``--axis``, ``--grid``, ``--seed``,
``--out``. The resolved configuration is echoed into every output.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    bound_audit_suite,
    default_lambda_grid,
    fs_map_check,
    random_fs_map_trials,
    random_perturbation_audits,
    records_to_csv,
    schur_property_audits,
    sweep,
)
from .analysis.errors import compute_errors
from .eigensolver import fixed_point_by_index, fixed_point_by_target, reference_solve
from .exceptions import ConfigurationError, FsError
from .operators import FsParams
from .planewave import Convention, FourierPotential, PlanewaveBasis, load_potential, potential_from_json, regularity_norm

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2

DEFAULTS = {
    "potential": {"family": "Vt", "t": 1.0},
    "L": None,
    "M": 2,
    "N": 500,
    "K": 4,
    "r": 1.0,
    "alpha": None,
    "convention": "strictly_below",
    "strategy": "index",
    "index": 1,
    "target": None,
    "tol": 1e-12,
    "max_iter": 50,
    "N_e": 1000,
    "s": 0.0,
    "reference": False,
    "seed": 0,
    "out": None,
    "axis": None,
    "grid": None,
    "jobs": 1,
    "trials": 100,
    "perturbation_trials": 200,
    "audit_M": [2, 4],
    "lambda_grid": None,
    "audits": ["fsmap", "perturbation", "bounds", "schur"],
    "rhs_scale": 1.0,
    "matrix": None,
    "coarse_dim": None,
}


class RunConfig(dict):
    """Resolved configuration; a plain dict with validation helpers."""

    def params(self, **override) -> FsParams:
        fields = {k: self[k] for k in ("M", "N", "K", "r", "alpha", "convention")}
        fields.update(override)
        return FsParams(**fields)

    def potential(self) -> FourierPotential:
        return build_potential(self["potential"], self["L"])


def build_potential(source, L=None) -> FourierPotential:
    if source == "zero":
        source = {"coeffs": {}}
    if isinstance(source, str):
        V = load_potential(source)
        if L is not None and float(L) != V.L:
            raise ConfigurationError(f"L={L} conflicts with the potential file period {V.L}")
        return V
    if not isinstance(source, dict):
        raise ConfigurationError("field 'potential' must be an object, a file path or \"zero\"")
    source = dict(source)
    if "file" in source:
        return build_potential(source["file"], L)
    if L is not None:
        source["L"] = float(L)
    return potential_from_json(source)


_INT_FIELDS = ("M", "N", "K", "index", "max_iter", "N_e", "seed", "jobs", "trials", "perturbation_trials")
_FLOAT_FIELDS = ("r", "tol", "s", "rhs_scale")


def _check_int(name, value, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"field '{name}' must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"field '{name}' must be >= {minimum}, got {value}")


def validate(cfg: dict, command: str) -> RunConfig:
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigurationError(f"unknown config field '{unknown[0]}'")
    list_ok = {"M", "N", "K"} if command == "sweep" else set()
    for name in _INT_FIELDS:
        value = cfg[name]
        if name in list_ok and isinstance(value, list):
            if not value:
                raise ConfigurationError(f"field '{name}' must not be an empty list")
            for v in value:
                _check_int(name, v)
        else:
            _check_int(name, value, minimum=0)
    for name in _FLOAT_FIELDS:
        if isinstance(cfg[name], bool) or not isinstance(cfg[name], (int, float)):
            raise ConfigurationError(f"field '{name}' must be a number, got {cfg[name]!r}")
    if cfg["tol"] <= 0:
        raise ConfigurationError("field 'tol' must be positive")
    if cfg["L"] is not None and (not isinstance(cfg["L"], (int, float)) or cfg["L"] <= 0):
        raise ConfigurationError(f"field 'L' must be a positive number, got {cfg['L']!r}")
    if cfg["strategy"] not in ("index", "target"):
        raise ConfigurationError(f"field 'strategy' must be 'index' or 'target', got {cfg['strategy']!r}")
    if cfg["strategy"] == "target" and not isinstance(cfg["target"], (int, float)):
        raise ConfigurationError("field 'target' must be a number when strategy is 'target'")
    if cfg["index"] < 1:
        raise ConfigurationError("field 'index' must be >= 1")
    try:
        Convention(cfg["convention"])
    except ValueError:
        raise ConfigurationError(f"field 'convention' must be one of {[c.value for c in Convention]}") from None
    if cfg["axis"] is not None and cfg["axis"] not in ("K", "N", "M"):
        raise ConfigurationError(f"field 'axis' must be K, N or M, got {cfg['axis']!r}")
    if not isinstance(cfg["audits"], list) or not set(cfg["audits"]) <= {"fsmap", "perturbation", "bounds", "schur"}:
        raise ConfigurationError("field 'audits' must be a list drawn from fsmap, perturbation, bounds, schur")
    audit_M = cfg["audit_M"]
    if not isinstance(audit_M, list) or not audit_M:
        raise ConfigurationError("field 'audit_M' must be a nonempty list of integers")
    for v in audit_M:
        _check_int("audit_M", v, minimum=1)
    if cfg["lambda_grid"] is not None and not (
        isinstance(cfg["lambda_grid"], list) and all(isinstance(x, (int, float)) for x in cfg["lambda_grid"])
    ):
        raise ConfigurationError("field 'lambda_grid' must be a list of numbers")
    out = RunConfig(cfg)
    if command == "solve":
        out.params()  # structural checks (N >= M, ...)
    out.potential()
    return out


def parse_grid(text) -> list:
    """``"a:b:step"`` (inclusive) or ``"a,b,c"``; lists pass through."""
    if isinstance(text, list):
        values = text
    elif not isinstance(text, str) or not text.strip():
        raise ConfigurationError("field 'grid' is empty")
    elif ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ConfigurationError(f"grid {text!r} must look like a:b or a:b:step")
        try:
            a, b = int(parts[0]), int(parts[1])
            step = int(parts[2]) if len(parts) == 3 else 1
        except ValueError:
            raise ConfigurationError(f"grid {text!r} has non-integer entries") from None
        if step <= 0:
            raise ConfigurationError("grid step must be positive")
        values = list(range(a, b + 1, step))
    else:
        try:
            values = [int(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(f"grid {text!r} has non-integer entries") from None
    if not values:
        raise ConfigurationError("field 'grid' is empty")
    for v in values:
        _check_int("grid", v, minimum=0)
    return values


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def resolve_config(args, command: str) -> RunConfig:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigurationError("config document must be a JSON object")
        cfg.update(doc)
    cfg.update(_parse_set(args.set))
    for name in ("axis", "grid", "seed", "out", "jobs"):
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    return validate(cfg, command)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True)


def _complex_list(v) -> list:
    v = np.asarray(v)
    return [[float(z.real), float(z.imag)] for z in v]


def _emit(cfg, text: str, summary: str) -> None:
    """Write ``text`` to the configured output, or to stdout with the summary on stderr."""
    if cfg["out"]:
        Path(cfg["out"]).write_text(text, encoding="utf-8")
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)


def cmd_solve(cfg: RunConfig) -> int:
    V = cfg.potential()
    params = cfg.params()
    if cfg["strategy"] == "index":
        fp = fixed_point_by_index(params, V, cfg["index"], tol=cfg["tol"], max_iter=cfg["max_iter"])
    else:
        fp = fixed_point_by_target(params, V, float(cfg["target"]), tol=cfg["tol"], max_iter=cfg["max_iter"])
    coarse = params.coarse(V.L)
    fine = params.fine(V.L)
    result = {
        "lambda_sigma": fp.lambda_sigma,
        "lambda0": fp.lambda0,
        "iterates": fp.iterates,
        "scf_count": fp.scf_count,
        "converged": fp.converged,
        "strategy": str(fp.strategy),
        "selected_index": fp.selected_index,
        "residual": fp.residual,
        "coarse_modes": coarse.modes.tolist(),
        "phi_sigma": _complex_list(fp.phi_sigma),
        "fine_modes": fine.modes.tolist(),
        "lifted": _complex_list(fp.lifted.fine),
    }
    if cfg["reference"]:
        count = cfg["index"] if cfg["strategy"] == "index" else coarse.dim
        ref = reference_solve(V, cfg["N_e"], count, params.convention)
        nv = regularity_norm(V, params.r, 2 * cfg["N_e"])
        rec = compute_errors(fp, ref, V, norm_V_r=nv, s=cfg["s"])
        result["errors"] = {
            "lambda_ref": rec.lambda_ref, "err_val": rec.err_val, "err_vec": rec.err_vec,
            "err_vec_coarse_s": rec.err_vec_coarse_s, "epsilon_bound": rec.epsilon_bound,
        }
    doc = {"format_version": FORMAT_VERSION, "command": "solve", "config": dict(cfg), "result": result}
    status = "converged" if fp.converged else "NOT converged"
    summary = (
        f"lambda_sigma = {fp.lambda_sigma:.15g}  ({status}, {fp.scf_count} iterations, "
        f"M={params.M} N={params.N} K={params.K}, {fp.strategy})"
    )
    _emit(cfg, _dumps(doc) + "\n", summary)
    return EXIT_OK if fp.converged else EXIT_FAIL


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg["axis"] is None:
        raise ConfigurationError("sweep needs an axis (--axis or field 'axis')")
    if cfg["grid"] is None:
        raise ConfigurationError("sweep needs a grid (--grid or field 'grid')")
    axis = cfg["axis"]
    grid = parse_grid(cfg["grid"])
    V = cfg.potential()
    others = [k for k in ("M", "N", "K") if k != axis]
    series = [cfg[k] if isinstance(cfg[k], list) else [cfg[k]] for k in others]
    if isinstance(cfg[axis], list):
        raise ConfigurationError(f"field '{axis}' is the swept axis and cannot be a list")
    target = float(cfg["target"]) if cfg["strategy"] == "target" else None
    records = []
    nv = None
    for combo in itertools.product(*series):
        fixed_fields = dict(zip(others, combo))
        fixed_fields[axis] = grid[0]
        try:
            fixed = cfg.params(**fixed_fields)
        except ConfigurationError:
            # keep the series even if its first grid point is invalid
            fixed_fields[axis] = max(grid)
            fixed = cfg.params(**fixed_fields)
        if nv is None:
            nv = regularity_norm(V, fixed.r, 2 * cfg["N_e"])
        records.extend(sweep(
            axis, grid, fixed, V, cfg["index"], target=target, N_e=cfg["N_e"], norm_V_r=nv,
            s=cfg["s"], tol=cfg["tol"], max_iter=cfg["max_iter"], jobs=cfg["jobs"],
        ))
    echo = dict(cfg, grid=grid)
    text = records_to_csv(records, config=echo)
    failures = sum(1 for r in records if r.failed or not r.converged)
    _emit(cfg, text, f"{len(records)} rows, {failures} not converged or failed")
    return EXIT_OK


def _audit_lines(cfg: RunConfig):
    """All audit records as dictionaries plus the violation count."""
    lines, violations, skipped = [], 0, 0
    seed = cfg["seed"]
    if "fsmap" in cfg["audits"]:
        for n, rep in enumerate(random_fs_map_trials(cfg["trials"], seed=seed)):
            d = rep.to_dict()
            lines.append({"name": "fs_map_check", "trial": n, "passed": d["passed"], "dim": d["dim"], "coarse_dim": d["coarse_dim"]})
            violations += not rep.passed
    if "perturbation" in cfg["audits"]:
        for a in random_perturbation_audits(cfg["perturbation_trials"], seed=seed):
            a = a.rescaled(cfg["rhs_scale"])
            lines.append(a.to_dict())
            violations += not a.satisfied
    V = None
    if {"bounds", "schur"} & set(cfg["audits"]):
        V = cfg.potential()
    for M in cfg["audit_M"]:
        if V is None:
            break
        params = cfg.params(M=M, N=max(M, cfg["N"]))
        nv = regularity_norm(V, params.r, 2 * cfg["N_e"])
        grid = cfg["lambda_grid"] or default_lambda_grid(params, V, N_e=cfg["N_e"], norm_V_r=nv).tolist()
        if "bounds" in cfg["audits"]:
            audits, skips = bound_audit_suite(params, V, grid, N_e=cfg["N_e"], norm_V_r=nv, return_skipped=True)
            for a in audits:
                a = a.rescaled(cfg["rhs_scale"])
                lines.append(a.to_dict())
                violations += not a.satisfied
            lines.extend(s.to_dict() for s in skips)
            skipped += len(skips)
        if "schur" in cfg["audits"]:
            for a in schur_property_audits(M, cfg["N_e"], V, grid, params.convention):
                a = a.rescaled(cfg["rhs_scale"])
                lines.append(a.to_dict())
                violations += not a.satisfied
    return lines, violations, skipped


def cmd_audit(cfg: RunConfig) -> int:
    lines, violations, skipped = _audit_lines(cfg)
    header = {"format_version": FORMAT_VERSION, "command": "audit", "config": dict(cfg)}
    summary = {"summary": {"records": len(lines), "violations": violations, "skipped": skipped}}
    text = "".join(json.dumps(x, sort_keys=True) + "\n" for x in [header, *lines, summary])
    _emit(cfg, text, f"audit: {len(lines)} records, {violations} violations, {skipped} skipped")
    return EXIT_FAIL if violations else EXIT_OK


def cmd_fsmap_check(cfg: RunConfig) -> int:
    if cfg["matrix"] is not None:
        try:
            H = np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in cfg["matrix"]])
        except (TypeError, ValueError):
            raise ConfigurationError("field 'matrix' must be a square list of numbers or [re, im] pairs") from None
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ConfigurationError("field 'matrix' must be square")
        if cfg["coarse_dim"] is None:
            raise ConfigurationError("field 'coarse_dim' is required with 'matrix'")
        _check_int("coarse_dim", cfg["coarse_dim"], minimum=1)
        try:
            reports = [fs_map_check(H, cfg["coarse_dim"])]
        except FsError as exc:
            raise ConfigurationError(str(exc)) from None
    else:
        reports = random_fs_map_trials(cfg["trials"], seed=cfg["seed"])
    failed = sum(not r.passed for r in reports)
    header = {"format_version": FORMAT_VERSION, "command": "fsmap-check", "config": dict(cfg)}
    body = [dict(r.to_dict(), trial=n) for n, r in enumerate(reports)]
    summary = {"summary": {"trials": len(reports), "failed": failed, "solvable": sum(r.solvable for r in reports)}}
    text = "".join(json.dumps(x, sort_keys=True) + "\n" for x in [header, *body, summary])
    _emit(cfg, text, f"fsmap-check: {len(reports)} trials, {failed} failed")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "audit": cmd_audit, "fsmap-check": cmd_fsmap_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsplanewave",
        description="Planewave Feshbach-Schur eigensolver for 1D periodic Schrödinger operators.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log more (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("solve", "one fixed-point solve"),
        ("sweep", "convergence sweep written as CSV"),
        ("audit", "numerical audits of the analytic bounds (JSON lines)"),
        ("fsmap-check", "isospectral reduction checks on random or given matrices"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="JSON configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (repeatable)")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, help="seed for randomized audits")
        if name == "sweep":
            p.add_argument("--axis", choices=("K", "N", "M"), help="swept parameter")
            p.add_argument("--grid", help='grid as "a:b:step" (inclusive) or a comma list')
            p.add_argument("--jobs", type=int, help="worker threads")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args, args.command)
        return COMMANDS[args.command](cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FsError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
