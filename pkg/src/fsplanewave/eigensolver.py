"""Hermitian eigensolver contract, reference solves and the fixed-point strategies."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .exceptions import ConfigurationError, ContractViolationError
from .operators import FsParams, LiftedVector, coarse_hamiltonian, fs_blocks, lift
from .planewave import Convention, FourierPotential, PlanewaveBasis, laplacian_diagonal, potential_block

logger = logging.getLogger(__name__)

HERMITIAN_RTOL = 1e-12
DEGENERACY_RTOL = 1e-10
CLUSTER_RTOL = 1e-8


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column real and positive."""
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    phases = pivots / np.abs(pivots)
    return vecs / phases[None, :]


def hermitian_eig(A) -> SpectralDecomposition:
    """Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises ContractViolationError when ``A`` is not Hermitian to 1e-12
    relative. Eigenvector phases are normalized so that the output is
    deterministic.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolationError(f"expected a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    asym = np.linalg.norm(A - A.conj().T)
    if asym > HERMITIAN_RTOL * max(scale, np.finfo(float).tiny):
        raise ContractViolationError(f"matrix is not Hermitian (relative asymmetry {asym / scale:.3g})")
    w, v = sla.eigh((A + A.conj().T) / 2)
    return SpectralDecomposition(w, _fix_phases(v))


def cluster_of(values: np.ndarray, j: int, rtol: float) -> np.ndarray:
    """Indices of entries equal to ``values[j]`` within ``rtol * max(1, |values[j]|)``."""
    tol = rtol * max(1.0, abs(values[j]))
    return np.flatnonzero(np.abs(values - values[j]) <= tol)


@dataclass(frozen=True)
class ReferenceSolution:
    """Lowest variational eigenpairs of ``P (-Δ + V) P`` on a large basis.

    ``gaps[j]`` is the distance of ``eigenvalues[j]`` to the rest of the
    computed spectrum, excluding its own degenerate cluster.
    """

    basis: PlanewaveBasis
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gaps: np.ndarray

    @property
    def N_e(self) -> int:
        return self.basis.cutoff

    def pairs(self):
        return [(self.eigenvalues[j], self.eigenvectors[:, j]) for j in range(self.eigenvalues.size)]

    def cluster(self, j: int) -> np.ndarray:
        return cluster_of(self.eigenvalues, j, CLUSTER_RTOL)


def reference_solve(
    V: FourierPotential, N_e: int, count: int, convention=Convention.STRICTLY_BELOW
) -> ReferenceSolution:
    """Lowest ``count`` eigenpairs of the Galerkin Hamiltonian on ``X_{N_e}``."""
    basis = PlanewaveBasis(V.L, N_e, convention)
    if not 1 <= count <= basis.dim:
        raise ConfigurationError(f"count must be in [1, {basis.dim}], got {count}")
    # a few extra eigenvalues so the gap of the last requested one is defined
    n_eig = min(basis.dim, count + 8)
    w, v = _reference_eigh(V, basis, n_eig)
    gaps = np.empty(count)
    for j in range(count):
        members = cluster_of(w, j, CLUSTER_RTOL)
        others = np.delete(w, members)
        gaps[j] = np.min(np.abs(others - w[j])) if others.size else np.inf
    return ReferenceSolution(basis, w[:count].copy(), v[:, :count].copy(), gaps)


@lru_cache(maxsize=6)
def _reference_eigh(V, basis, n_eig):
    H = potential_block(V, basis, basis) + np.diag(laplacian_diagonal(basis))
    w, v = sla.eigh(H, subset_by_index=[0, n_eig - 1], driver="evr")
    # Rayleigh-Ritz on the computed subspace: the raw eigenvalues carry
    # errors of order eps * ||H|| (the Laplacian diagonal), the Ritz values
    # only of order eps times the much smaller energy of the eigenvectors
    Hs = v.conj().T @ (H @ v)
    w, c = sla.eigh((Hs + Hs.conj().T) / 2)
    v = _fix_phases(v @ c)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def galerkin_eigenvalues(params: FsParams, V: FourierPotential) -> np.ndarray:
    """Eigenvalues of the plain Galerkin matrix ``H_M`` (λ → -∞ limit of ``H_sigma``)."""
    blocks = fs_blocks(params.M, params.N, V, params.convention)
    return sla.eigvalsh(blocks.h_coarse)


@dataclass(frozen=True)
class Strategy:
    """``kind`` is ``"index"`` (1-based eigenvalue index) or ``"target"`` (energy)."""

    kind: str
    value: float

    def __str__(self):
        if self.kind == "index":
            return f"index({int(self.value)})"
        return f"target({self.value!r})"


@dataclass
class FixedPointResult:
    lambda_sigma: float
    phi_sigma: np.ndarray
    lifted: LiftedVector
    iterates: list
    strategy: Strategy
    converged: bool
    params: FsParams
    lambda0: float
    selected_index: int = 0  # 1-based position of the selected eigenvalue at the end
    residual: float = field(default=np.nan)

    @property
    def scf_count(self) -> int:
        return len(self.iterates) - 1


def _track_vector(dec: SpectralDecomposition, j: int, previous: Optional[np.ndarray]) -> np.ndarray:
    """Eigenvector ``j``; inside a degenerate cluster, the one closest to ``previous``."""
    vec = dec.eigenvectors[:, j]
    if previous is None:
        return vec
    members = cluster_of(dec.eigenvalues, j, DEGENERACY_RTOL)
    if members.size == 1:
        return vec
    basis = dec.eigenvectors[:, members]
    proj = basis @ (basis.conj().T @ previous)
    norm = np.linalg.norm(proj)
    if norm < 1e-8:
        return vec
    return _fix_phases((proj / norm)[:, None])[:, 0]


def _iterate(params, V, select, lambda0, tol, max_iter, strategy) -> FixedPointResult:
    lam = float(lambda0)
    iterates = [lam]
    previous = None
    converged = False
    for _ in range(max_iter):
        dec = hermitian_eig(coarse_hamiltonian(params, V, lam).matrix)
        j = select(dec.eigenvalues)
        previous = _track_vector(dec, j, previous)
        new = float(dec.eigenvalues[j])
        iterates.append(new)
        step = abs(new - lam)
        lam = new
        if step < tol:
            converged = True
            break
    op = coarse_hamiltonian(params, V, lam)
    dec = hermitian_eig(op.matrix)
    j = select(dec.eigenvalues)
    phi = _track_vector(dec, j, previous)
    residual = float(np.linalg.norm(op.matrix @ phi - lam * phi))
    if not converged:
        logger.info("fixed point %s did not converge in %d iterations", strategy, max_iter)
    return FixedPointResult(
        lambda_sigma=lam,
        phi_sigma=phi,
        lifted=lift(params, V, lam, phi),
        iterates=iterates,
        strategy=strategy,
        converged=converged,
        params=params,
        lambda0=float(lambda0),
        selected_index=j + 1,
        residual=residual,
    )


def fixed_point_by_index(
    params: FsParams,
    V: FourierPotential,
    i: int,
    lambda0: Optional[float] = None,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> FixedPointResult:
    """Iterate ``λ_k = i-th eigenvalue of H_sigma(λ_{k-1})`` (``i`` is 1-based).

    Starts from the ``i``-th Galerkin eigenvalue on ``X_M`` unless
    ``lambda0`` is given. Stops when the increment drops below ``tol``;
    non-convergence is reported through ``converged=False``. Raises
    DomainExitError if an iterate reaches the window floor.
    """
    dim = fs_blocks(params.M, params.N, V, params.convention).coarse.dim
    if not 1 <= i <= dim:
        raise ConfigurationError(f"eigenvalue index {i} outside 1..{dim}")
    if lambda0 is None:
        lambda0 = galerkin_eigenvalues(params, V)[i - 1]
    return _iterate(
        params, V, lambda w: i - 1, lambda0, tol, max_iter, Strategy("index", i)
    )


def closest_index(values: np.ndarray, target: float) -> int:
    """Index of the value closest to ``target``; ties go to the smaller value."""
    dist = np.abs(values - target)
    best = dist.min()
    ties = np.flatnonzero(dist <= best + 1e-12 * max(1.0, abs(target), best))
    return int(ties[np.argmin(values[ties])])


def fixed_point_by_target(
    params: FsParams,
    V: FourierPotential,
    lambda_t: float,
    lambda0: Optional[float] = None,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> FixedPointResult:
    """Iterate on the eigenvalue of ``H_sigma(λ_{k-1})`` closest to ``lambda_t``.

    The default start is the Galerkin eigenvalue closest to ``lambda_t``.
    """
    if lambda0 is None:
        w = galerkin_eigenvalues(params, V)
        lambda0 = w[closest_index(w, lambda_t)]
    return _iterate(
        params,
        V,
        lambda w: closest_index(w, lambda_t),
        lambda0,
        tol,
        max_iter,
        Strategy("target", float(lambda_t)),
    )
