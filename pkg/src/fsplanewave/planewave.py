"""Planewave bases on [0, L), Fourier potentials and the regularity norm.

Modes are ordered by ``|k|`` and then by sign, i.e. ``0, +1, -1, +2, -2, ...``,
so that a basis with a smaller cutoff is always a prefix of a larger one and
the complement window ``X_N - X_M`` is a contiguous slice.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Mapping, NamedTuple, Union

import numpy as np
from scipy.linalg import matmul_toeplitz
from scipy.sparse.linalg import LinearOperator, eigsh

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_AUDIT_CUTOFF = 2000
NORM_CONVERGENCE_RTOL = 1e-3
# dense eigvalsh below this size, Lanczos above
_DENSE_NORM_LIMIT = 1600


class Convention(str, enum.Enum):
    """Whether cutoff ``M`` keeps modes ``|k| <= M-1`` or ``|k| <= M``."""

    STRICTLY_BELOW = "strictly_below"
    UP_TO = "up_to"


def mode_indices(kmax: int) -> np.ndarray:
    """Integer frequencies ``0, 1, -1, ..., kmax, -kmax``."""
    if kmax < 0:
        return np.zeros(0, dtype=int)
    ks = np.arange(1, kmax + 1)
    return np.concatenate(([0], np.column_stack((ks, -ks)).ravel()))


@dataclass(frozen=True)
class PlanewaveBasis:
    """Span of the planewaves ``exp(2i pi k x / L)`` below a cutoff."""

    L: float
    cutoff: int
    convention: Convention = Convention.STRICTLY_BELOW

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention(self.convention))
        if not self.L > 0:
            raise ConfigurationError(f"period L must be positive, got {self.L}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 0:
            raise ConfigurationError(f"cutoff must be a nonnegative integer, got {self.cutoff}")
        if self.convention is Convention.STRICTLY_BELOW and self.cutoff < 1:
            raise ConfigurationError("strictly-below convention needs cutoff >= 1")

    @property
    def kmax(self) -> int:
        if self.convention is Convention.STRICTLY_BELOW:
            return self.cutoff - 1
        return self.cutoff

    @property
    def dim(self) -> int:
        return 2 * self.kmax + 1

    @property
    def modes(self) -> np.ndarray:
        return mode_indices(self.kmax)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * self.modes / self.L

    @property
    def rho(self) -> float:
        """``(2 pi M / L)**2`` for the cutoff ``M``."""
        return (2 * np.pi * self.cutoff / self.L) ** 2

    def with_cutoff(self, cutoff: int) -> "PlanewaveBasis":
        return PlanewaveBasis(self.L, cutoff, self.convention)


@dataclass(frozen=True)
class IndexWindow:
    """Orthogonal complement of ``lo`` inside ``hi`` (range of ``P_N - P_M``)."""

    lo: PlanewaveBasis
    hi: PlanewaveBasis

    def __post_init__(self):
        _check_compatible(self.lo, self.hi)
        if self.hi.cutoff < self.lo.cutoff:
            raise ConfigurationError(
                f"window upper cutoff {self.hi.cutoff} below lower cutoff {self.lo.cutoff}"
            )

    @property
    def L(self) -> float:
        return self.hi.L

    @property
    def convention(self) -> Convention:
        return self.hi.convention

    @property
    def dim(self) -> int:
        return self.hi.dim - self.lo.dim

    @property
    def slice(self) -> slice:
        """Position of the window inside the ``hi`` coefficient vector."""
        return slice(self.lo.dim, self.hi.dim)

    @property
    def modes(self) -> np.ndarray:
        return self.hi.modes[self.slice]

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * self.modes / self.L


Space = Union[PlanewaveBasis, IndexWindow]


def _check_compatible(a: Space, b: Space) -> None:
    if not math.isclose(a.L, b.L, rel_tol=1e-14):
        raise ConfigurationError(f"period mismatch: {a.L} vs {b.L}")
    if a.convention is not b.convention:
        raise ConfigurationError(
            f"cutoff convention mismatch: {a.convention.value} vs {b.convention.value}"
        )


@dataclass(frozen=True, eq=False)
class FourierPotential:
    """Real ``L``-periodic potential given by its Fourier coefficients.

    ``values[n]`` stores the coefficient of frequency ``n >= 0``; negative
    frequencies follow from ``V_{-n} = conj(V_n)``. Frequencies above
    ``max_stored_freq`` are zero. ``meta`` records provenance (e.g. the
    family parameters) and is echoed into outputs.

    Instances hash by identity, which is what the assembly caches key on.
    """

    values: np.ndarray
    L: float = 1.0
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex).ravel()
        if vals.size == 0:
            vals = np.zeros(1, dtype=complex)
        if abs(vals[0].imag) > 1e-14 * max(1.0, abs(vals[0])):
            raise ConfigurationError("zero-frequency coefficient of a real potential must be real")
        vals[0] = vals[0].real
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if not self.L > 0:
            raise ConfigurationError(f"period L must be positive, got {self.L}")
        object.__setattr__(self, "meta", dict(self.meta))

    @classmethod
    def from_mapping(cls, coeffs: Mapping, L: float = 1.0, meta=None) -> "FourierPotential":
        """Build from ``{n: c}``; ``c`` may be a number or ``[re, im]``.

        Missing negative frequencies are filled by Hermitian symmetry; given
        pairs must satisfy it.
        """
        parsed = {}
        for key, value in coeffs.items():
            try:
                n = int(key)
            except (TypeError, ValueError):
                raise ConfigurationError(f"coefficient key {key!r} is not an integer") from None
            parsed[n] = _parse_complex(value, key)
        nmax = max((abs(n) for n in parsed), default=0)
        vals = np.zeros(nmax + 1, dtype=complex)
        for n, c in parsed.items():
            if n >= 0:
                vals[n] = c
        for n, c in parsed.items():
            if n < 0:
                partner = parsed.get(-n)
                if partner is None:
                    vals[-n] = np.conj(c)
                elif abs(partner - np.conj(c)) > 1e-12 * max(1.0, abs(c)):
                    raise ConfigurationError(
                        f"coefficients {n} and {-n} violate Hermitian symmetry (real potential)"
                    )
        return cls(vals, L=L, meta=meta or {})

    @property
    def max_stored_freq(self) -> int:
        return self.values.size - 1

    @cached_property
    def is_real_symmetric(self) -> bool:
        """True when every matrix block is real (all coefficients real)."""
        return bool(np.all(self.values.imag == 0))

    def coefficient(self, n):
        """Vectorized ``V_n`` lookup for integer array ``n``."""
        n = np.asarray(n)
        a = np.abs(n)
        inside = a <= self.max_stored_freq
        c = self.values[np.where(inside, a, 0)]
        c = np.where(n < 0, np.conj(c), c)
        c = np.where(inside, c, 0)
        return c.real if self.is_real_symmetric else c

    def scaled(self, factor: float) -> "FourierPotential":
        return FourierPotential(self.values * factor, L=self.L, meta=self.meta)

    def to_mapping(self) -> dict:
        return {
            str(n): [float(c.real), float(c.imag)]
            for n, c in enumerate(self.values)
            if c != 0
        }


def _parse_complex(value, key) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigurationError(f"coefficient {key!r} must be [re, im]")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float, complex)) and not isinstance(value, bool):
        return complex(value)
    raise ConfigurationError(f"coefficient {key!r} has unsupported value {value!r}")


@lru_cache(maxsize=32)
def vt_potential(
    t: float,
    L: float = 1.0,
    v0: float = -10.0,
    amplitude: float = -5.0,
    max_freq: int = 4000,
) -> FourierPotential:
    """Test family with ``V_0 = v0`` and ``V_n = amplitude / |n|**t``.

    The family has infinitely many nonzero coefficients; ``max_freq`` must
    cover every frequency difference used downstream (``2 * N_e`` for a
    reference at cutoff ``N_e``, twice the audit cutoff for the norm).
    Memoized, so equal arguments give the same (cache-friendly) instance.
    """
    n = np.arange(1, max_freq + 1, dtype=float)
    vals = np.concatenate(([v0], amplitude / n**t)).astype(complex)
    meta = {"family": "Vt", "t": t, "v0": v0, "amplitude": amplitude, "max_freq": max_freq}
    return FourierPotential(vals, L=L, meta=meta)


def potential_from_json(doc: Mapping) -> FourierPotential:
    """Parse ``{"L": .., "coeffs": {...}}`` or ``{"family": "Vt", "t": ..}``."""
    if not isinstance(doc, Mapping):
        raise ConfigurationError("potential document must be a JSON object")
    L = float(doc.get("L", 1.0))
    if "family" in doc:
        if doc["family"] != "Vt":
            raise ConfigurationError(f"unknown potential family {doc['family']!r}")
        if "t" not in doc:
            raise ConfigurationError("potential family 'Vt' needs field 't'")
        kwargs = {k: doc[k] for k in ("v0", "amplitude", "max_freq") if k in doc}
        return vt_potential(float(doc["t"]), L=L, **kwargs)
    if "coeffs" not in doc:
        raise ConfigurationError("potential document needs 'coeffs' or 'family'")
    return FourierPotential.from_mapping(doc["coeffs"], L=L, meta={"source": "coeffs"})


def load_potential(path) -> FourierPotential:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"potential file {path}: invalid JSON ({exc})") from None
    return potential_from_json(doc)


def potential_to_json(V: FourierPotential) -> dict:
    if V.meta.get("family") == "Vt":
        keys = ("family", "t", "v0", "amplitude", "max_freq")
        return {"L": V.L, **{k: V.meta[k] for k in keys}}
    return {"L": V.L, "coeffs": V.to_mapping()}


def laplacian_diagonal(space: Space) -> np.ndarray:
    """Eigenvalues ``(2 pi k / L)**2`` of ``-Laplacian`` in mode order."""
    return space.wavenumbers**2


def potential_block(V: FourierPotential, rows: Space, cols: Space) -> np.ndarray:
    """Matrix of multiplication by ``V`` between two planewave sets.

    Entry ``(k, k')`` is ``V_{k - k'}``. Real when ``V`` has real
    coefficients, complex otherwise.
    """
    _check_compatible(rows, cols)
    if not math.isclose(V.L, rows.L, rel_tol=1e-14):
        raise ConfigurationError(f"potential period {V.L} differs from basis period {rows.L}")
    return V.coefficient(rows.modes[:, None] - cols.modes[None, :])


def spectral_norm_hermitian(A: np.ndarray) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    n = A.shape[0]
    if n == 0:
        return 0.0
    if n <= _DENSE_NORM_LIMIT:
        return float(np.max(np.abs(np.linalg.eigvalsh(A))))
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(n)
    w = eigsh(A, k=1, which="LM", v0=v0, tol=1e-13, return_eigenvectors=False)
    return float(abs(w[0]))


def sobolev_weights(wavenumbers: np.ndarray, r: float) -> np.ndarray:
    """Diagonal of ``(1 - Laplacian)**((r - 1) / 2)``."""
    return (1.0 + wavenumbers**2) ** ((r - 1.0) / 2.0)


def regularity_norm(V: FourierPotential, r: float, audit_cutoff: int = DEFAULT_AUDIT_CUTOFF) -> float:
    """Truncated ``||V||_r``.

    Spectral norm of ``w_k V_{k-k'} w_k'`` with
    ``w_k = (1 + (2 pi k / L)**2)**((r - 1) / 2)`` over ``|k|, |k'| <= audit_cutoff``.
    Nondecreasing in ``audit_cutoff`` (the truncations are compressions).
    """
    if r < 0:
        raise ConfigurationError(f"regularity index must be >= 0, got {r}")
    if audit_cutoff < 0:
        raise ConfigurationError("audit_cutoff must be nonnegative")
    return _regularity_norm_cached(V, float(r), int(audit_cutoff))


@lru_cache(maxsize=64)
def _regularity_norm_cached(V, r, audit_cutoff):
    if 2 * audit_cutoff > V.max_stored_freq and V.meta.get("family") == "Vt":
        logger.warning(
            "audit cutoff %d needs frequencies up to %d but only %d are stored; "
            "the missing tail is treated as zero",
            audit_cutoff,
            2 * audit_cutoff,
            V.max_stored_freq,
        )
    # natural ordering -c..c makes the potential matrix Toeplitz
    ks = np.arange(-audit_cutoff, audit_cutoff + 1)
    w = sobolev_weights(2 * np.pi * ks / V.L, r)
    n = ks.size
    if n <= _DENSE_NORM_LIMIT:
        A = w[:, None] * V.coefficient(ks[:, None] - ks[None, :]) * w[None, :]
        return spectral_norm_hermitian(A)
    diffs = np.arange(n)
    col = V.coefficient(diffs)
    row = V.coefficient(-diffs)
    dtype = float if V.is_real_symmetric else complex

    def matvec(x):
        x = np.asarray(x).ravel()
        return w * matmul_toeplitz((col, row), w * x)

    op = LinearOperator((n, n), matvec=matvec, dtype=dtype)
    v0 = np.random.default_rng(0).standard_normal(n)
    vals = eigsh(op, k=1, which="LM", v0=v0, tol=1e-12, return_eigenvectors=False)
    return float(abs(vals[0]))


class NormReport(NamedTuple):
    value: float
    doubled: float
    rel_change: float
    converged: bool


def regularity_norm_report(
    V: FourierPotential, r: float, audit_cutoff: int = DEFAULT_AUDIT_CUTOFF
) -> NormReport:
    """Evaluate the truncated norm at ``audit_cutoff`` and twice that.

    Converged when the relative change is below ``NORM_CONVERGENCE_RTOL``.
    Potentials at the edge of the admissible regularity (e.g. a logarithmic
    singularity with ``r = 1``) grow without bound and never converge; the
    value at ``audit_cutoff`` is then only a lower bound of the true norm.
    """
    a = regularity_norm(V, r, audit_cutoff)
    b = regularity_norm(V, r, 2 * audit_cutoff)
    rel = abs(b - a) / b if b > 0 else 0.0
    ok = rel < NORM_CONVERGENCE_RTOL
    if not ok:
        logger.warning("||V||_%g not converged: %.6g -> %.6g on cutoff doubling", r, a, b)
    return NormReport(a, b, rel, ok)


def kappa(basis: PlanewaveBasis, r: float, norm_V_r: float) -> float:
    """Lower bound ``rho_M - (rho_M + 1) rho_M**(-r) ||V||_r`` of the complement operator."""
    rho = basis.rho
    return rho - (rho + 1.0) * rho ** (-r) * norm_V_r
