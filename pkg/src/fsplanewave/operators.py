"""Feshbach-Schur effective operators on the coarse planewave space.

All matrices act on coefficient vectors in the mode order of
:mod:`fsplanewave.planewave`. The coarse space ``X_M`` is a prefix of the
fine space ``X_N``; the window ``X_N - X_M`` is the remaining slice.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    ConfigurationError,
    DomainExitError,
    NearSingularError,
    SingularResolventError,
)
from .planewave import (
    Convention,
    FourierPotential,
    IndexWindow,
    PlanewaveBasis,
    laplacian_diagonal,
    potential_block,
)

logger = logging.getLogger(__name__)

DOMAIN_MARGIN = 1e-9
ASYMMETRY_TRIPWIRE = 1e-12


@dataclass(frozen=True)
class FsParams:
    """Discretization ``sigma = (N, M, K)`` with regularity index and shift.

    ``alpha`` is only used by bound audits; ``None`` lets them pick a default.
    """

    M: int
    N: int
    K: int = 0
    r: float = 1.0
    alpha: Optional[float] = None
    convention: Convention = Convention.STRICTLY_BELOW

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention(self.convention))
        for name in ("M", "N", "K"):
            value = getattr(self, name)
            if int(value) != value:
                raise ConfigurationError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.M < 1:
            raise ConfigurationError(f"M must be >= 1, got {self.M}")
        if self.N < self.M:
            raise ConfigurationError(f"N must be >= M, got N={self.N}, M={self.M}")
        if self.K < 0:
            raise ConfigurationError(f"K must be >= 0, got {self.K}")
        if self.r < 0:
            raise ConfigurationError(f"r must be >= 0, got {self.r}")
        if self.alpha is not None and self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")

    def coarse(self, L: float) -> PlanewaveBasis:
        return PlanewaveBasis(L, self.M, self.convention)

    def fine(self, L: float) -> PlanewaveBasis:
        return PlanewaveBasis(L, self.N, self.convention)

    def window(self, L: float) -> IndexWindow:
        return IndexWindow(self.coarse(L), self.fine(L))

    def replace(self, **changes) -> "FsParams":
        fields = dict(
            M=self.M, N=self.N, K=self.K, r=self.r, alpha=self.alpha, convention=self.convention
        )
        fields.update(changes)
        return FsParams(**fields)


@dataclass(frozen=True)
class FsBlocks:
    """λ-independent pieces shared by every evaluation at fixed (M, N, V)."""

    coarse: PlanewaveBasis
    fine: PlanewaveBasis
    window: IndexWindow
    h_coarse: np.ndarray  # P_M (-Δ + V) P_M
    coupling: np.ndarray  # P_M V P_M^N, shape (dim X_M, dim window)
    lap_window: np.ndarray
    v_window: np.ndarray  # P_M^N V P_M^N

    @property
    def window_floor(self) -> float:
        """Smallest Laplacian eigenvalue in the window (``inf`` if empty)."""
        return float(self.lap_window.min()) if self.lap_window.size else np.inf

    def window_operator(self) -> np.ndarray:
        """``P_M^N (-Δ + V) P_M^N`` as a dense matrix."""
        return self.v_window + np.diag(self.lap_window)


def fs_blocks(M: int, N: int, V: FourierPotential, convention=Convention.STRICTLY_BELOW) -> FsBlocks:
    return _fs_blocks(int(M), int(N), V, Convention(convention))


@lru_cache(maxsize=16)
def _fs_blocks(M, N, V, convention):
    coarse = PlanewaveBasis(V.L, M, convention)
    fine = PlanewaveBasis(V.L, N, convention)
    window = IndexWindow(coarse, fine)
    blocks = FsBlocks(
        coarse=coarse,
        fine=fine,
        window=window,
        h_coarse=potential_block(V, coarse, coarse) + np.diag(laplacian_diagonal(coarse)),
        coupling=potential_block(V, coarse, window),
        lap_window=laplacian_diagonal(window),
        v_window=potential_block(V, window, window),
    )
    for a in (blocks.h_coarse, blocks.coupling, blocks.lap_window, blocks.v_window):
        a.setflags(write=False)
    return blocks


def lambda_guard(blocks: FsBlocks) -> float:
    """Upper limit for admissible λ: the window floor minus a relative margin."""
    floor = blocks.window_floor
    return floor - DOMAIN_MARGIN * floor


def check_lambda(blocks: FsBlocks, lam: float) -> None:
    if blocks.window.dim == 0:
        return
    guard = lambda_guard(blocks)
    if not lam < guard:
        raise DomainExitError(
            f"lambda={lam!r} is not below the window floor {blocks.window_floor!r} "
            f"(guard {guard!r})"
        )


def windowed_resolvent(window: IndexWindow, lam: float) -> np.ndarray:
    """Diagonal of ``(-Δ - λ)^{-1}`` restricted to the window.

    Returned as a 1-D array of diagonal entries.
    """
    lap = laplacian_diagonal(window)
    gap = lap - lam
    scale = np.maximum(np.abs(lap), 1.0)
    hit = np.abs(gap) <= 1e-12 * scale
    if np.any(hit):
        k = int(window.modes[np.argmax(hit)])
        raise SingularResolventError(
            f"lambda={lam!r} coincides with the Laplacian eigenvalue of mode k={k}"
        )
    return 1.0 / gap


def neumann_series(window: IndexWindow, V: FourierPotential, lam: float, K: int) -> np.ndarray:
    """Truncated Neumann series ``R = sum_{k<=K} (-1)^k (G V)^k G`` as a dense matrix.

    Accumulated as ``T_0 = G`` and ``T_{k+1} = T_k (-V G)``.
    """
    g = windowed_resolvent(window, lam)
    v = potential_block(V, window, window)
    minus_vg = -v * g[None, :]
    term = np.diag(g).astype(v.dtype)
    total = term.copy()
    for _ in range(K):
        term = term @ minus_vg
        total += term
    return total


def apply_neumann_series(g: np.ndarray, v_window: np.ndarray, X: np.ndarray, K: int) -> np.ndarray:
    """``R X`` without forming ``R``: ``Y_0 = G X``, ``Y_{k+1} = -G V Y_k``."""
    y = g[:, None] * X
    total = y.copy()
    for _ in range(K):
        y = -g[:, None] * (v_window @ y)
        total += y
    return total


def _hermitize(A: np.ndarray, what: str) -> np.ndarray:
    scale = np.linalg.norm(A)
    if scale > 0:
        asym = np.linalg.norm(A - A.conj().T) / scale
        if asym > ASYMMETRY_TRIPWIRE:
            logger.warning("%s asymmetric before symmetrization: %.3g relative", what, asym)
        else:
            logger.debug("%s asymmetry %.3g", what, asym)
    return (A + A.conj().T) / 2


def _coupled_resolvent(params: FsParams, V: FourierPotential, lam: float):
    """``S = R_sigma(λ) P_M^N V P_M`` together with the blocks it came from."""
    blocks = fs_blocks(params.M, params.N, V, params.convention)
    check_lambda(blocks, lam)
    g = windowed_resolvent(blocks.window, lam)
    S = apply_neumann_series(g, blocks.v_window, blocks.coupling.conj().T, params.K)
    return blocks, S


def effective_interaction(params: FsParams, V: FourierPotential, lam: float) -> np.ndarray:
    """Truncated effective interaction ``U_sigma(λ) = -B R_sigma(λ) B*``.

    ``B = P_M V P_M^N``. Zero when ``N == M``.
    """
    blocks = fs_blocks(params.M, params.N, V, params.convention)
    if blocks.window.dim == 0:
        return np.zeros_like(blocks.h_coarse)
    blocks, S = _coupled_resolvent(params, V, lam)
    return _hermitize(-blocks.coupling @ S, "U_sigma")


@dataclass(frozen=True)
class EffectiveOperator:
    """Coarse Hamiltonian ``H_sigma(λ) = H_M + U_sigma(λ)`` and its parts."""

    lam: float
    h_coarse: np.ndarray
    u_sigma: np.ndarray
    window: IndexWindow

    @property
    def matrix(self) -> np.ndarray:
        return self.h_coarse + self.u_sigma


def coarse_hamiltonian(params: FsParams, V: FourierPotential, lam: float) -> EffectiveOperator:
    blocks = fs_blocks(params.M, params.N, V, params.convention)
    return EffectiveOperator(
        lam=lam,
        h_coarse=blocks.h_coarse,
        u_sigma=effective_interaction(params, V, lam),
        window=blocks.window,
    )


@dataclass(frozen=True)
class LiftedVector:
    """Coarse coefficients and their image under ``Q_sigma(λ)`` on ``X_N``."""

    coarse: np.ndarray
    fine: np.ndarray

    def embedded(self, dim: int) -> np.ndarray:
        """Fine vector zero-padded to a larger basis with the same mode order."""
        if dim < self.fine.size:
            raise ConfigurationError(f"cannot embed {self.fine.size} coefficients into {dim}")
        out = np.zeros(dim, dtype=np.result_type(self.fine, complex))
        out[: self.fine.size] = self.fine
        return out


def lift(params: FsParams, V: FourierPotential, lam: float, coarse_vec) -> LiftedVector:
    """Apply ``Q_sigma(λ) = 1 - R_sigma(λ) P_M^N V P_M`` to a coarse vector."""
    coarse_vec = np.asarray(coarse_vec)
    blocks = fs_blocks(params.M, params.N, V, params.convention)
    if coarse_vec.shape != (blocks.coarse.dim,):
        raise ConfigurationError(
            f"coarse vector has shape {coarse_vec.shape}, expected ({blocks.coarse.dim},)"
        )
    if blocks.window.dim == 0:
        return LiftedVector(coarse_vec.copy(), coarse_vec.copy())
    blocks, S = _coupled_resolvent(params, V, lam)
    fine = np.concatenate([coarse_vec, -S @ coarse_vec])
    return LiftedVector(coarse_vec.copy(), fine)


@lru_cache(maxsize=8)
def _window_cholesky_data(M, N_e, V, convention):
    blocks = fs_blocks(M, N_e, V, convention)
    return blocks, blocks.window_operator()


def _shifted_solve(M, N_e, V, lam, convention):
    blocks, hw = _window_cholesky_data(int(M), int(N_e), V, Convention(convention))
    if blocks.window.dim == 0:
        return blocks, None
    shifted = hw - lam * np.eye(hw.shape[0])
    try:
        factor = sla.cho_factor(shifted, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        smallest = float(sla.eigvalsh(hw, subset_by_index=[0, 0])[0]) - lam
        raise NearSingularError(
            f"complement operator minus lambda={lam!r} is not positive definite; "
            f"smallest eigenvalue {smallest!r}",
            smallest_eigenvalue=smallest,
        ) from None
    X = sla.cho_solve(factor, blocks.coupling.conj().T, check_finite=False)
    return blocks, X


def schur_exact_interaction(
    M: int, N_e: int, V: FourierPotential, lam: float, convention=Convention.STRICTLY_BELOW
) -> np.ndarray:
    """``U_M(λ) = -P_M V P^⊥ (H^⊥ - λ)^{-1} P^⊥ V P_M`` with ``P^⊥`` cut at ``N_e``.

    Dense Cholesky solve; requires the shifted complement operator to be
    positive definite, which holds for λ below its smallest eigenvalue.
    """
    blocks, X = _shifted_solve(M, N_e, V, lam, convention)
    if X is None:
        return np.zeros_like(blocks.h_coarse)
    return _hermitize(-blocks.coupling @ X, "U_M")


def schur_exact_derivative(
    M: int, N_e: int, V: FourierPotential, lam: float, convention=Convention.STRICTLY_BELOW
) -> np.ndarray:
    """``U_M'(λ) = -B (H^⊥ - λ)^{-2} B*``, nonpositive."""
    blocks, X = _shifted_solve(M, N_e, V, lam, convention)
    if X is None:
        return np.zeros_like(blocks.h_coarse)
    return -(X.conj().T @ X)


def complement_min_eigenvalue(M: int, N_e: int, V: FourierPotential, convention=Convention.STRICTLY_BELOW) -> float:
    """Smallest eigenvalue of ``P_M^⊥ (-Δ + V) P_M^⊥`` truncated at ``N_e``."""
    blocks, hw = _window_cholesky_data(int(M), int(N_e), V, Convention(convention))
    if blocks.window.dim == 0:
        return np.inf
    return float(sla.eigvalsh(hw, subset_by_index=[0, 0])[0])
