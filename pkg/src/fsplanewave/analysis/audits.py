"""Numerical audits of the analytic inequalities behind the method.

Every audit compares a computed left-hand side with a right-hand side
bound on a finite instance. Audits whose hypotheses fail are skipped and,
on request, reported with the reason.

Audit names and the inequality each one checks:

``complement_lower_bound``
    smallest eigenvalue of ``P_M^⊥ H P_M^⊥`` (cut at ``N_e``) is at least
    ``kappa_M = rho_M - (rho_M + 1) rho_M^{-r} ||V||_r``.
``window_compression`` / ``window_coupling_bound``
    ``||h^{-1/2} V_M^N h^{-1/2}|| <= ||h^{-1/2} V_M^⊥ h^{-1/2}|| <= 4 rho_M^{-r} ||V||_r``
    with ``h = -Δ - λ``.
``truncated_interaction_bound``
    ``||U_sigma(λ)||_r <= 4 rho_M^{-r} ||V||_r^2 sum_{k<=K} q^k``, ``q = 4 rho_M^{-r} ||V||_r``.
``interaction_derivative_bound`` (and ``..._fd`` for the difference quotient)
    ``||U_M'(λ)||_r <= rho_M^{-r} 4 ||V||_r^2 / (pi (kappa_M - 2λ) (1 - q))``.
``series_truncation_bound``
    two-term bound on ``||U_M(λ) - U_sigma(λ)||_r``.
``interaction_lipschitz_bound``
    ``||U_M(mu) - U_M(λ)||_r <= |mu - λ|`` times the derivative bound at ``λ``.
``weyl_form_bound``
    ``|nu_i(H0 + W) - nu_i(H0)| <= (nu_i(H0) + alpha) ||W||_{H0,alpha}``.
``cluster_eigenvalue_shift``, ``cluster_count``, ``eigenvector_form_deviation``,
``eigenvector_deviation``
    eigenvalue and eigenvector estimates near an isolated eigenvalue of
    ``H0`` under the relative smallness of ``W``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from ..eigensolver import hermitian_eig
from ..exceptions import ConfigurationError, NearSingularError
from ..operators import (
    FsParams,
    complement_min_eigenvalue,
    effective_interaction,
    fs_blocks,
    schur_exact_derivative,
    schur_exact_interaction,
)
from ..planewave import (
    FourierPotential,
    PlanewaveBasis,
    kappa,
    regularity_norm,
    sobolev_weights,
    spectral_norm_hermitian,
)

logger = logging.getLogger(__name__)

AUDIT_RTOL = 1e-9
PROPERTY_SLACK = 1e-12


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass(frozen=True)
class BoundAudit:
    """``satisfied`` holds exactly when ``lhs <= rhs * (1 + 1e-9)``."""

    name: str
    lhs: float
    rhs: float
    satisfied: bool = field(init=False)
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "satisfied", bool(self.lhs <= self.rhs * (1 + AUDIT_RTOL)))

    def rescaled(self, factor: float) -> "BoundAudit":
        """Same audit with the bound multiplied by ``factor``."""
        return replace(self, rhs=self.rhs * factor)

    def to_dict(self) -> dict:
        return _jsonable({
            "name": self.name, "lhs": self.lhs, "rhs": self.rhs,
            "satisfied": self.satisfied, "inputs": self.inputs,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class SkippedAudit:
    name: str
    reason: str
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable({"name": self.name, "skipped": True, "reason": self.reason, "inputs": self.inputs})


def weighted_norm(A: np.ndarray, wavenumbers: np.ndarray, r: float) -> float:
    """``||(1 - Δ)^{(r-1)/2} A (1 - Δ)^{(r-1)/2}||`` for a Hermitian ``A``."""
    w = sobolev_weights(wavenumbers, r)
    return spectral_norm_hermitian(w[:, None] * A * w[None, :])


# ---------------------------------------------------------------------------
# isospectral reduction on finite matrices


@dataclass
class FsMapEigencheck:
    lam: float
    multiplicity: int
    solvable: bool
    singular: bool = False
    reconstructed: bool = False
    nullity: int = 0
    nullity_ok: bool = False
    min_singular_value: float = np.nan
    reconstruction_error: float = np.nan
    reason: str = ""

    @property
    def passed(self) -> bool:
        return (not self.solvable) or (self.singular and self.reconstructed and self.nullity_ok)


@dataclass
class FsMapReport:
    dim: int
    coarse_dim: int
    checks: list

    @property
    def solvable(self) -> bool:
        return any(c.solvable for c in self.checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return _jsonable({
            "dim": self.dim, "coarse_dim": self.coarse_dim, "passed": self.passed,
            "checks": [dict(asdict(c), passed=c.passed) for c in self.checks],
        })


def fs_map_check(
    H: np.ndarray, coarse_dim: int, tol: float = 1e-9, solvable_rtol: float = 1e-6
) -> FsMapReport:
    """Check the isospectral reduction of ``H`` onto its first ``coarse_dim`` coordinates.

    For every eigenvalue ``λ`` of ``H`` with ``H_perp - λ`` invertible
    (distance of ``λ`` to the spectrum of ``H_perp`` above
    ``solvable_rtol * max(1, ||H||)``), with
    ``F(λ) = H_pp - λ - H_pq (H_qq - λ)^{-1} H_qp``:

    * ``F(λ)`` is singular: smallest singular value below ``tol`` times the scale;
    * ``Q(λ) P psi = P psi - (H_qq - λ)^{-1} H_qp P psi`` equals ``psi``
      within ``tol`` for every eigenvector;
    * the nullity of ``F(λ)`` equals the multiplicity of ``λ``.
    """
    H = np.asarray(H)
    n = H.shape[0]
    if not 1 <= coarse_dim <= n:
        raise ConfigurationError(f"coarse_dim must be in 1..{n}, got {coarse_dim}")
    dec = hermitian_eig(H)
    scale = max(1.0, float(np.max(np.abs(dec.eigenvalues))))
    c = coarse_dim
    Hpp, Hpq, Hqp, Hqq = H[:c, :c], H[:c, c:], H[c:, :c], H[c:, c:]
    perp = np.linalg.eigvalsh(Hqq) if n > c else np.array([])
    checks = []
    j = 0
    w = dec.eigenvalues
    while j < n:
        members = np.flatnonzero(np.abs(w - w[j]) <= tol * scale)
        members = members[members >= j]
        lam = float(np.mean(w[members]))
        j = members[-1] + 1
        dist = float(np.min(np.abs(perp - lam))) if perp.size else np.inf
        if dist <= solvable_rtol * scale:
            checks.append(FsMapEigencheck(lam, members.size, False, reason=f"H_perp - λ nearly singular (distance {dist:.3g})"))
            continue
        R = np.linalg.solve(Hqq - lam * np.eye(n - c), Hqp) if n > c else np.zeros((0, c))
        F = Hpp - lam * np.eye(c) - Hpq @ R
        sv = np.linalg.svd(F, compute_uv=False)
        fscale = max(scale, float(sv.max()))
        nullity = int(np.sum(sv <= tol * fscale))
        psi = dec.eigenvectors[:, members]
        top = psi[:c]
        rebuilt = np.vstack([top, -R @ top])
        recon = float(np.max(np.linalg.norm(rebuilt - psi, axis=0)))
        checks.append(FsMapEigencheck(
            lam=lam,
            multiplicity=int(members.size),
            solvable=True,
            singular=bool(sv.min() <= tol * fscale),
            reconstructed=bool(recon <= tol),
            nullity=nullity,
            nullity_ok=nullity == members.size,
            min_singular_value=float(sv.min()),
            reconstruction_error=recon,
        ))
    return FsMapReport(n, c, checks)


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (A + A.conj().T) / 2


def random_degenerate_hermitian(n: int, multiplicity: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian matrix with one eigenvalue of the given multiplicity."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    vals = rng.uniform(-3, 3, n)
    vals[:multiplicity] = vals[0]
    H = (Q * vals) @ Q.conj().T
    return (H + H.conj().T) / 2


def random_fs_map_trials(
    trials: int = 100,
    seed: int = 0,
    dims: tuple = (4, 12),
    coarse_dims: tuple = (1, 4),
    degenerate_fraction: float = 0.25,
    tol: float = 1e-9,
) -> list:
    """Run :func:`fs_map_check` on random instances, some with degenerate eigenvalues."""
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(trials):
        n = int(rng.integers(dims[0], dims[1] + 1))
        c = int(rng.integers(coarse_dims[0], min(coarse_dims[1], n - 1) + 1))
        if rng.random() < degenerate_fraction:
            m = int(rng.integers(2, max(2, c) + 1))
            H = random_degenerate_hermitian(n, m, rng)
        else:
            H = random_hermitian(n, rng)
        reports.append(fs_map_check(H, c, tol=tol))
    return reports


# ---------------------------------------------------------------------------
# perturbation estimates


def relative_form_norm(H0: np.ndarray, W: np.ndarray, alpha: float) -> float:
    """``||(H0 + alpha)^{-1/2} W (H0 + alpha)^{-1/2}||``."""
    w0, Q0 = sla.eigh(H0)
    if np.any(w0 + alpha <= 0):
        raise ConfigurationError("H0 + alpha must be positive definite")
    Ah = Q0 * (w0 + alpha) ** -0.5
    return spectral_norm_hermitian(Ah.conj().T @ W @ Ah)


def perturbation_audit(
    H0: np.ndarray,
    W: np.ndarray,
    alpha: Optional[float] = None,
    cluster_rtol: float = 1e-9,
    return_skipped: bool = False,
    inputs: Optional[dict] = None,
):
    """Audit the eigenvalue and eigenvector estimates for ``H = H0 + W``.

    ``alpha`` defaults to ``max(1, 1 - min eig H0)``. The eigenvalue bound
    ``weyl_form_bound`` is audited for every index. For each eigenvalue
    cluster ``λ0`` of ``H0`` with gap ``γ0`` the cluster estimates apply when
    ``||W|| <= γ0 / (2 (λ0 + alpha))`` and the eigenvector estimates when
    ``||W|| <= γ0 / (4 λ°)`` with ``λ° = λ0 + alpha + γ0``; ``psi_0i = P_0 psi_i``.
    """
    H0 = np.asarray(H0)
    W = np.asarray(W)
    d0 = hermitian_eig(H0)
    dH = hermitian_eig(H0 + W)
    hermitian_eig(W)  # Hermitian contract only
    w0, Q0 = d0.eigenvalues, d0.eigenvectors
    if alpha is None:
        alpha = max(1.0, 1.0 - float(w0.min()))
    if np.any(w0 + alpha <= 0):
        raise ConfigurationError(f"H0 + alpha is not positive definite (alpha={alpha})")
    Ah = Q0 * (w0 + alpha) ** -0.5
    wn = spectral_norm_hermitian(Ah.conj().T @ W @ Ah)
    mu, Psi = dH.eigenvalues, dH.eigenvectors
    base = dict(inputs or {}, alpha=alpha, form_norm=wn)
    audits, skipped = [], []
    for i in range(w0.size):
        audits.append(BoundAudit(
            "weyl_form_bound", abs(mu[i] - w0[i]), (w0[i] + alpha) * wn, dict(base, index=i),
        ))
    scale = max(1.0, float(np.max(np.abs(w0))))
    j = 0
    while j < w0.size:
        idx = np.flatnonzero(np.abs(w0 - w0[j]) <= cluster_rtol * scale)
        idx = idx[idx >= j]
        j = idx[-1] + 1
        lam0 = float(np.mean(w0[idx]))
        rest = np.delete(w0, idx)
        info = dict(base, lambda0=lam0, multiplicity=int(idx.size))
        if rest.size == 0:
            skipped.append(SkippedAudit("cluster_eigenvalue_shift", "no remaining spectrum, gap undefined", info))
            continue
        gap = float(np.min(np.abs(rest - lam0)))
        info["gap"] = gap
        if wn > 0.5 * gap / (lam0 + alpha):
            skipped.append(SkippedAudit("cluster_eigenvalue_shift", "perturbation too large for the cluster estimate", info))
            continue
        inside = int(np.sum(np.abs(mu - lam0) <= 0.5 * gap))
        audits.append(BoundAudit("cluster_count", abs(inside - idx.size), 0.0, info))
        for i in idx:
            audits.append(BoundAudit(
                "cluster_eigenvalue_shift", abs(mu[i] - lam0), (lam0 + alpha) * wn, dict(info, index=int(i)),
            ))
        lam_circ = lam0 + alpha + gap
        if wn > 0.25 * gap / lam_circ:
            skipped.append(SkippedAudit("eigenvector_deviation", "perturbation too large for the eigenvector estimate", info))
            continue
        P0 = Q0[:, idx]
        for i in idx:
            psi = Psi[:, i]
            diff = P0 @ (P0.conj().T @ psi) - psi
            form = np.linalg.norm((w0 + alpha) ** 0.5 * (Q0.conj().T @ diff))
            factor = 4 * lam_circ / gap
            audits.append(BoundAudit(
                "eigenvector_form_deviation", form, factor * math.sqrt(lam0 + alpha) * wn, dict(info, index=int(i)),
            ))
            audits.append(BoundAudit(
                "eigenvector_deviation", np.linalg.norm(diff), factor * wn, dict(info, index=int(i)),
            ))
    return (audits, skipped) if return_skipped else audits


def random_perturbation_audits(trials: int = 200, n: int = 20, seed: int = 0) -> list:
    """Perturbation audits on random ``H0`` and ``W`` of log-uniform relative size."""
    rng = np.random.default_rng(seed)
    audits = []
    for trial in range(trials):
        H0 = random_hermitian(n, rng) / math.sqrt(n)
        W = random_hermitian(n, rng) / math.sqrt(n)
        W *= 10 ** rng.uniform(-5, 0)
        audits.extend(perturbation_audit(H0, W, inputs={"trial": trial}))
    return audits


# ---------------------------------------------------------------------------
# bounds on the effective interaction


def default_lambda_grid(params: FsParams, V: FourierPotential, n: int = 5, N_e: int = 1000, norm_V_r: Optional[float] = None) -> np.ndarray:
    """``n`` points in ``[-kappa_M / 2, 0.45 kappa_M]``."""
    if norm_V_r is None:
        norm_V_r = regularity_norm(V, params.r, 2 * N_e)
    k = kappa(params.coarse(V.L), params.r, norm_V_r)
    if k <= 0:
        raise ConfigurationError(f"kappa_M = {k:.6g} is not positive; no admissible grid")
    return np.linspace(-0.5 * k, 0.45 * k, n)


def bound_audit_suite(
    params: FsParams,
    V: FourierPotential,
    lambda_grid: Sequence[float],
    N_e: int = 1000,
    norm_V_r: Optional[float] = None,
    return_skipped: bool = False,
):
    """Audit the interaction bounds at each ``λ`` of ``lambda_grid``.

    Exact interactions use the complement cut at ``N_e``; ``norm_V_r``
    defaults to the truncated norm at cutoff ``2 N_e``, which is an upper
    bound for every compression used here. Coarse-space ``||.||_r`` norms use
    the coarse weights.
    """
    if N_e < params.N:
        raise ConfigurationError(f"N_e={N_e} below N={params.N}")
    L = V.L
    r, K = params.r, params.K
    if norm_V_r is None:
        norm_V_r = regularity_norm(V, r, 2 * N_e)
    nv = norm_V_r
    coarse = params.coarse(L)
    rho = coarse.rho
    rho_N = params.fine(L).rho
    kap = kappa(coarse, r, nv)
    q = 4 * rho ** (-r) * nv
    q_N = 4 * rho_N ** (-r) * nv
    kc = coarse.wavenumbers
    conv = params.convention
    base = dict(M=params.M, N=params.N, K=K, r=r, N_e=N_e, L=L, norm_V_r=nv, rho_M=rho, kappa=kap, ratio=q)
    audits, skipped = [], []

    def skip(name, reason, info):
        skipped.append(SkippedAudit(name, reason, info))

    audits.append(BoundAudit("complement_lower_bound", kap, complement_min_eigenvalue(params.M, N_e, V, conv), base))

    fine_blocks = fs_blocks(params.M, params.N, V, conv)
    full_blocks = fs_blocks(params.M, N_e, V, conv)
    deriv_rhs = {}
    for lam in map(float, lambda_grid):
        info = dict(base, **{"lambda": lam})

        if lam < rho / 2 and rho >= 1:
            norms = []
            for blocks in (fine_blocks, full_blocks):
                s = (blocks.lap_window - lam) ** -0.5
                norms.append(spectral_norm_hermitian(s[:, None] * blocks.v_window * s[None, :]))
            audits.append(BoundAudit("window_compression", norms[0], norms[1], info))
            audits.append(BoundAudit("window_coupling_bound", norms[1], q, info))
        else:
            skip("window_coupling_bound", "needs λ < rho_M / 2 and rho_M >= 1", info)

        if lam <= min(rho / 2, kap) and rho >= 1:
            U = effective_interaction(params, V, lam)
            rhs = 4 * rho ** (-r) * nv**2 * sum(q**k for k in range(K + 1))
            audits.append(BoundAudit("truncated_interaction_bound", weighted_norm(U, kc, r), rhs, info))
        else:
            skip("truncated_interaction_bound", "needs λ <= min(rho_M / 2, kappa_M) and rho_M >= 1", info)

        if lam < kap / 2 and rho >= 1 and q < 1:
            rhs = rho ** (-r) * 4 * nv**2 / (math.pi * (kap - 2 * lam) * (1 - q))
            deriv_rhs[lam] = rhs
            exact = schur_exact_derivative(params.M, N_e, V, lam, conv)
            audits.append(BoundAudit("interaction_derivative_bound", weighted_norm(exact, kc, r), rhs, info))
            h = 1e-4 * rho
            fd = _central_difference(params.M, N_e, V, lam, h, conv)
            fd_half = _central_difference(params.M, N_e, V, lam, h / 2, conv)
            richardson = (4 * fd_half - fd) / 3
            audits.append(BoundAudit("interaction_derivative_bound_fd", weighted_norm(fd, kc, r), rhs, dict(info, step=h)))
            exact_norm = weighted_norm(exact, kc, r)
            audits.append(BoundAudit(
                "derivative_richardson_consistency",
                weighted_norm(richardson - exact, kc, r),
                1e-6 * exact_norm + 1e-13,
                dict(info, step=h),
            ))
        else:
            skip("interaction_derivative_bound", "needs λ < kappa_M / 2, rho_M >= 1 and 4 rho_M^-r ||V||_r < 1", info)

        cond = q_N + 16 * rho ** (-2 * r) * nv**2 / (1 - q) if q < 1 else np.inf
        if lam < min(kap, rho / 2) and rho_N >= rho > 1 and q < 1 and cond < 1:
            exact = schur_exact_interaction(params.M, N_e, V, lam, conv)
            U = effective_interaction(params, V, lam)
            first = 4 * rho_N ** (-r) * nv**2 / (1 - cond) * (1 + q / (1 - q)) ** 2
            second = 4 * rho ** (-r) * nv**2 / (1 - q) * q ** (K + 1)
            audits.append(BoundAudit(
                "series_truncation_bound", weighted_norm(exact - U, kc, r), first + second, info,
            ))
        else:
            skip("series_truncation_bound", "needs λ < min(kappa_M, rho_M / 2), rho_N >= rho_M > 1 and both smallness conditions", info)

    lams = sorted(float(x) for x in lambda_grid)
    for lo, hi in zip(lams, lams[1:]):
        info = dict(base, **{"lambda": lo, "mu": hi})
        if hi < min(kap, rho / 2) and lo < kap / 2 and rho >= 1 and q < 1:
            diff = schur_exact_interaction(params.M, N_e, V, hi, conv) - schur_exact_interaction(params.M, N_e, V, lo, conv)
            rhs = (hi - lo) * rho ** (-r) / (math.pi * (kap - 2 * lo)) * 4 * nv**2 / (1 - q)
            audits.append(BoundAudit("interaction_lipschitz_bound", weighted_norm(diff, kc, r), rhs, info))
        else:
            skip("interaction_lipschitz_bound", "needs λ < mu < min(kappa_M, rho_M / 2), λ < kappa_M / 2 and 4 rho_M^-r ||V||_r < 1", info)
    return (audits, skipped) if return_skipped else audits


def _central_difference(M, N_e, V, lam, h, convention):
    up = schur_exact_interaction(M, N_e, V, lam + h, convention)
    down = schur_exact_interaction(M, N_e, V, lam - h, convention)
    return (up - down) / (2 * h)


def schur_property_audits(M: int, N_e: int, V: FourierPotential, lambda_grid: Sequence[float], convention="strictly_below") -> list:
    """Non-positivity of ``U_M(λ)`` and its decrease in ``λ`` on a grid.

    Recorded as audits with ``rhs`` equal to the slack ``1e-12``.
    """
    lams = sorted(float(x) for x in lambda_grid)
    mats = [schur_exact_interaction(M, N_e, V, lam, convention) for lam in lams]
    audits = []
    for lam, U in zip(lams, mats):
        top = float(np.linalg.eigvalsh(U).max())
        audits.append(BoundAudit("interaction_nonpositive", top, PROPERTY_SLACK, {"M": M, "N_e": N_e, "lambda": lam}))
    for (l1, U1), (l2, U2) in zip(zip(lams, mats), zip(lams[1:], mats[1:])):
        top = float(np.linalg.eigvalsh(U2 - U1).max())
        audits.append(BoundAudit("interaction_decreasing", top, PROPERTY_SLACK, {"M": M, "N_e": N_e, "lambda": l1, "mu": l2}))
    return audits


def gap_transfer_audit(M: int, V: FourierPotential, reference, count: Optional[int] = None, convention="strictly_below") -> list:
    """Gap of ``λ_i`` inside the spectrum of ``H_M + U_M(λ_i)`` versus its reference gap.

    ``U_M`` is cut at the reference cutoff, so both spectra come from the
    same finite operator. Audit: ``γ0 - 1e-8 <= coarse gap``. Eigenvalues
    above the complement spectrum are left out.
    """
    N_e = reference.N_e
    blocks = fs_blocks(M, N_e, V, convention)
    count = reference.eigenvalues.size if count is None else count
    audits = []
    for j in range(count):
        lam = float(reference.eigenvalues[j])
        try:
            U = schur_exact_interaction(M, N_e, V, lam, convention)
        except NearSingularError:
            continue
        w = np.linalg.eigvalsh(blocks.h_coarse + U)
        scale = max(1.0, abs(lam))
        others = w[np.abs(w - lam) > 1e-8 * scale]
        gap = float(np.min(np.abs(others - lam))) if others.size else np.inf
        audits.append(BoundAudit(
            "gap_transfer", float(reference.gaps[j]) - 1e-8, gap, {"M": M, "N_e": N_e, "index": j + 1, "lambda": lam},
        ))
    return audits
