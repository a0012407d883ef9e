"""Error metrics of fixed-point solutions against a reference solve."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..eigensolver import FixedPointResult, ReferenceSolution, cluster_of, CLUSTER_RTOL
from ..exceptions import AlignmentError, ConfigurationError
from ..operators import FsParams
from ..planewave import FourierPotential, PlanewaveBasis, sobolev_weights

logger = logging.getLogger(__name__)

ALIGNMENT_FLOOR = 1e-8


def epsilon_bound(params: FsParams, norm_V_r: float, L: float = 1.0) -> float:
    """Truncation factor ``rho_N^{-r} + rho_M^{-r} (4 rho_M^{-r} ||V||_r)^{K+1}``."""
    rho_M = PlanewaveBasis(L, params.M, params.convention).rho
    rho_N = PlanewaveBasis(L, params.N, params.convention).rho
    r = params.r
    return rho_N ** (-r) + rho_M ** (-r) * (4.0 * rho_M ** (-r) * norm_V_r) ** (params.K + 1)


@dataclass
class ErrorRecord:
    """One fixed-point solve measured against the reference.

    ``err_vec`` compares the lifted vector with the reference eigenfunction
    whose coarse part best matches ``phi_sigma`` (least squares over the
    reference eigenspace). ``err_vec_unit`` uses unit-normalized vectors
    instead. Failed solves keep NaN errors and a message in ``error``.
    """

    params: FsParams
    i: int
    err_val: float = np.nan
    err_vec: float = np.nan
    err_vec_coarse_s: float = np.nan
    err_vec_unit: float = np.nan
    s: float = 0.0
    scf_count: int = 0
    epsilon_bound: float = np.nan
    converged: bool = False
    lambda_sigma: float = np.nan
    lambda_ref: float = np.nan
    strategy: str = ""
    t: Optional[float] = None
    error: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return bool(self.error)


def reference_index(fp: FixedPointResult, reference: ReferenceSolution) -> int:
    """0-based reference eigenvalue matched with ``fp``.

    By-index solves keep their index; by-target solves take the reference
    eigenvalue closest to ``lambda_sigma``.
    """
    if fp.strategy.kind == "index":
        j = int(fp.strategy.value) - 1
        if j >= reference.eigenvalues.size:
            raise ConfigurationError(
                f"reference has {reference.eigenvalues.size} eigenpairs, index {j + 1} requested"
            )
        return j
    return int(np.argmin(np.abs(reference.eigenvalues - fp.lambda_sigma)))


def compute_errors(
    fp: FixedPointResult,
    reference: ReferenceSolution,
    V: FourierPotential,
    norm_V_r: Optional[float] = None,
    s: float = 0.0,
) -> ErrorRecord:
    """Eigenvalue and eigenvector errors of ``fp`` against ``reference``."""
    params = fp.params
    if reference.basis.convention != params.convention or reference.basis.L != V.L:
        raise ConfigurationError("reference basis does not match the solve")
    if reference.N_e < params.N:
        raise ConfigurationError(f"reference cutoff {reference.N_e} below N={params.N}")
    j = reference_index(fp, reference)
    members = cluster_of(reference.eigenvalues, j, CLUSTER_RTOL)
    psi = reference.eigenvectors[:, members]
    coarse = PlanewaveBasis(V.L, params.M, params.convention)
    m = coarse.dim
    phi = fp.phi_sigma

    # reference eigenfunction whose coarse block is closest to phi_sigma
    C = psi[:m]
    coef, *_ = np.linalg.lstsq(C, phi, rcond=None)
    matched = C @ coef
    if np.linalg.norm(matched) < ALIGNMENT_FLOOR:
        raise AlignmentError(
            f"coarse eigenvector has no overlap with the reference eigenspace of index {j + 1}"
        )
    target = psi @ coef
    fine = fp.lifted.embedded(reference.basis.dim)
    err_vec = float(np.linalg.norm(target - fine))

    # same comparison with both vectors normalized and phase aligned
    proj = psi @ (psi.conj().T @ fine)
    proj /= np.linalg.norm(proj)
    unit = fine / np.linalg.norm(fine)
    overlap = np.vdot(proj, unit)
    if abs(overlap) > 0:
        proj *= overlap / abs(overlap)
    err_vec_unit = float(np.linalg.norm(proj - unit))

    w = sobolev_weights(coarse.wavenumbers, 2 * s + 1)  # (1 + |k|^2)^s
    err_s = float(np.linalg.norm(w * (matched - phi)))

    eps = np.nan if norm_V_r is None else epsilon_bound(params, norm_V_r, V.L)
    return ErrorRecord(
        params=params,
        i=j + 1,
        err_val=float(abs(reference.eigenvalues[j] - fp.lambda_sigma)),
        err_vec=err_vec,
        err_vec_coarse_s=err_s,
        err_vec_unit=err_vec_unit,
        s=s,
        scf_count=fp.scf_count,
        epsilon_bound=eps,
        converged=fp.converged,
        lambda_sigma=fp.lambda_sigma,
        lambda_ref=float(reference.eigenvalues[j]),
        strategy=str(fp.strategy),
        t=V.meta.get("t"),
    )


def triangle_decomposition(
    fp: FixedPointResult, reference: ReferenceSolution, V: FourierPotential
) -> dict:
    """Split the eigenvalue error into discretization and truncation parts.

    ``discretization = |λ_ref - λ_N|`` with ``λ_N`` the Galerkin eigenvalue
    on ``X_N``; ``truncation = |λ_N - λ_sigma|``. Their sum bounds the total.
    """
    from ..eigensolver import reference_solve

    j = reference_index(fp, reference)
    galerkin = reference_solve(V, fp.params.N, j + 1, fp.params.convention).eigenvalues[j]
    total = abs(reference.eigenvalues[j] - fp.lambda_sigma)
    disc = abs(reference.eigenvalues[j] - galerkin)
    trunc = abs(galerkin - fp.lambda_sigma)
    return {
        "total": float(total),
        "discretization": float(disc),
        "truncation": float(trunc),
        "holds": bool(total <= (disc + trunc) * (1 + 1e-12) + 1e-15),
    }
