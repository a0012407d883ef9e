"""Parameter sweeps, CSV output and convergence-rate fits."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Sequence

import numpy as np

from ..eigensolver import fixed_point_by_index, fixed_point_by_target, reference_solve
from ..exceptions import ConfigurationError, FsError, InsufficientDataError
from ..operators import FsParams
from ..planewave import FourierPotential, PlanewaveBasis, regularity_norm
from .errors import ErrorRecord, compute_errors, epsilon_bound

logger = logging.getLogger(__name__)

AXES = ("K", "N", "M")
CSV_FORMAT_VERSION = 1
CSV_COLUMNS = (
    "M", "N", "K", "r", "t", "i", "strategy", "lambda_sigma", "err_val", "err_vec",
    "scf_count", "epsilon_bound", "converged",
)
FLOOR_FACTOR = 3.0


def solve_point(
    params: FsParams,
    V: FourierPotential,
    reference,
    *,
    i: int = 1,
    target: Optional[float] = None,
    norm_V_r: Optional[float] = None,
    s: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> ErrorRecord:
    """One fixed-point solve plus its errors; failures become records."""
    strategy = f"index({i})" if target is None else f"target({target!r})"
    try:
        if target is None:
            fp = fixed_point_by_index(params, V, i, tol=tol, max_iter=max_iter)
        else:
            fp = fixed_point_by_target(params, V, target, tol=tol, max_iter=max_iter)
        return compute_errors(fp, reference, V, norm_V_r=norm_V_r, s=s)
    except FsError as exc:
        logger.warning("solve failed at %s: %s", params, exc)
        eps = np.nan if norm_V_r is None else epsilon_bound(params, norm_V_r, V.L)
        return ErrorRecord(
            params=params, i=i, strategy=strategy, epsilon_bound=eps,
            t=V.meta.get("t"), error=f"{type(exc).__name__}: {exc}",
        )


def sweep(
    axis: str,
    grid: Sequence[int],
    fixed: FsParams,
    V: FourierPotential,
    i: int = 1,
    *,
    target: Optional[float] = None,
    N_e: int = 1000,
    reference=None,
    norm_V_r: Optional[float] = None,
    s: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 50,
    jobs: int = 1,
) -> list:
    """Vary one of ``K``, ``N`` or ``M`` over ``grid`` with the rest fixed.

    Returns one ErrorRecord per grid point in grid order. Invalid
    combinations (e.g. ``N < M``) and solver failures are recorded, not
    raised. ``norm_V_r`` defaults to the truncated norm at cutoff ``2 N_e``.
    """
    if axis not in AXES:
        raise ConfigurationError(f"axis must be one of {AXES}, got {axis!r}")
    grid = [int(g) for g in grid]
    if not grid:
        raise ConfigurationError("empty sweep grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError(f"sweep grid must be sorted ascending: {grid}")
    largest_N = max(grid) if axis == "N" else fixed.N
    if N_e < 2 * largest_N:
        logger.info("reference cutoff N_e=%d is below 2N=%d", N_e, 2 * largest_N)
    if N_e < largest_N:
        raise ConfigurationError(f"reference cutoff N_e={N_e} below N={largest_N}")
    if norm_V_r is None:
        norm_V_r = regularity_norm(V, fixed.r, 2 * N_e)
    if reference is None:
        largest_M = max(grid) if axis == "M" else fixed.M
        count = i if target is None else PlanewaveBasis(V.L, largest_M, fixed.convention).dim
        reference = reference_solve(V, N_e, count, fixed.convention)

    def run(value):
        try:
            params = fixed.replace(**{axis: value})
        except ConfigurationError as exc:
            return ErrorRecord(
                params=_loose_params(fixed, axis, value), i=i, t=V.meta.get("t"),
                strategy=f"index({i})" if target is None else f"target({target!r})",
                error=f"ConfigurationError: {exc}",
            )
        return solve_point(
            params, V, reference, i=i, target=target, norm_V_r=norm_V_r, s=s,
            tol=tol, max_iter=max_iter,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, grid))
    return [run(v) for v in grid]


class _LooseParams:
    """Parameter echo for grid points that fail validation."""

    def __init__(self, **kw):
        self.__dict__.update(kw)


def _loose_params(fixed: FsParams, axis: str, value: int):
    kw = dict(M=fixed.M, N=fixed.N, K=fixed.K, r=fixed.r, alpha=fixed.alpha, convention=fixed.convention)
    kw[axis] = value
    return _LooseParams(**kw)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


def records_to_csv(records: Iterable[ErrorRecord], config: Optional[dict] = None) -> str:
    """CSV text with ``#`` comment lines for the format version and config echo."""
    buf = io.StringIO()
    buf.write(f"# format_version={CSV_FORMAT_VERSION}\n")
    if config is not None:
        buf.write("# config=" + json.dumps(config, sort_keys=True, separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        p = rec.params
        writer.writerow([
            _fmt(p.M), _fmt(p.N), _fmt(p.K), _fmt(p.r), _fmt(rec.t), _fmt(rec.i), rec.strategy,
            _fmt(rec.lambda_sigma), _fmt(rec.err_val), _fmt(rec.err_vec), _fmt(rec.scf_count),
            _fmt(rec.epsilon_bound), _fmt(rec.converged and not rec.failed),
        ])
    return buf.getvalue()


def write_csv(path, records, config: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records, config))


def read_csv(path) -> list:
    """Rows of a sweep CSV as dictionaries (comment lines skipped)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def fit_rate(x, err, window: Optional[slice] = None, scale: str = "loglog") -> float:
    """Decay rate of ``err`` versus ``x`` by least squares.

    ``scale="loglog"`` fits ``log err`` against ``log x`` and returns the
    negated slope (``C x^{-p}`` gives ``p``). ``scale="semilog"`` fits
    ``log10 err`` against ``x`` and returns the negated slope, i.e. decades
    gained per unit step. Nonpositive or non-finite errors are dropped
    with a warning; fewer than three remaining points raise
    InsufficientDataError.
    """
    x = np.asarray(x, dtype=float)
    err = np.asarray(err, dtype=float)
    if window is not None:
        x, err = x[window], err[window]
    ok = np.isfinite(err) & (err > 0)
    if not ok.all():
        warnings.warn(f"dropping {int((~ok).sum())} nonpositive or non-finite errors from the fit")
        x, err = x[ok], err[ok]
    if x.size < 3:
        raise InsufficientDataError(f"need at least 3 valid points to fit a rate, got {x.size}")
    if scale == "loglog":
        if np.any(x <= 0):
            raise ConfigurationError("log-log fit needs positive abscissae")
        slope = np.polyfit(np.log(x), np.log(err), 1)[0]
    elif scale == "semilog":
        slope = np.polyfit(x, np.log10(err), 1)[0]
    else:
        raise ConfigurationError(f"unknown fit scale {scale!r}")
    return float(-slope) + 0.0


def stagnation_floor(records: Sequence[ErrorRecord], quantity: str = "err_val") -> float:
    """Error at the largest ``N``, and among those the largest ``K``."""
    good = [r for r in records if not r.failed and np.isfinite(getattr(r, quantity))]
    if not good:
        raise InsufficientDataError("no successful records")
    best = max(good, key=lambda r: (r.params.N, r.params.K))
    return float(getattr(best, quantity))


def pre_knee_mask(records: Sequence[ErrorRecord], quantity: str = "err_val", factor: float = FLOOR_FACTOR) -> np.ndarray:
    """Points whose error exceeds ``factor`` times the stagnation floor."""
    floor = stagnation_floor(records, quantity)
    values = np.array([getattr(r, quantity) for r in records], dtype=float)
    with np.errstate(invalid="ignore"):
        return np.isfinite(values) & (values > factor * floor)


def sweep_rate(records: Sequence[ErrorRecord], axis: str, quantity: str = "err_val", pre_knee: bool = True) -> float:
    """Rate along ``axis``; log-log for ``N`` and ``M``, semilog (decades per step) for ``K``."""
    x = np.array([getattr(r.params, axis) for r in records], dtype=float)
    y = np.array([getattr(r, quantity) for r in records], dtype=float)
    if pre_knee:
        mask = pre_knee_mask(records, quantity)
        x, y = x[mask], y[mask]
    return fit_rate(x, y, scale="semilog" if axis == "K" else "loglog")


def empirical_m0(k_sweeps: dict, quantity: str = "err_val", factor: float = FLOOR_FACTOR) -> Optional[int]:
    """Smallest ``M`` whose K-sweep decreases monotonically until the floor.

    ``k_sweeps`` maps ``M`` to the records of a K-sweep at that ``M``.
    Returns None when no sweep qualifies.
    """
    for M in sorted(k_sweeps):
        recs = k_sweeps[M]
        if any(r.failed for r in recs):
            continue
        mask = pre_knee_mask(recs, quantity, factor)
        values = np.array([getattr(r, quantity) for r in recs])[mask]
        if values.size and np.all(np.diff(values) < 0):
            return M
    return None
