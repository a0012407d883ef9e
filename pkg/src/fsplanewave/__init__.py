"""Planewave Feshbach-Schur eigensolver for 1D periodic Schrödinger operators.

The fine planewave problem on ``X_N`` is reduced to a small coarse problem
on ``X_M`` whose matrix depends on the spectral parameter:
``H_sigma(λ) = H_M + U_sigma(λ)``. Its fixed points are found by
iteration and lifted back to ``X_N``.
"""

__version__ = "0.1.0"

from .eigensolver import (
    FixedPointResult,
    ReferenceSolution,
    SpectralDecomposition,
    fixed_point_by_index,
    fixed_point_by_target,
    hermitian_eig,
    reference_solve,
)
from .exceptions import (
    AlignmentError,
    ConfigurationError,
    ContractViolationError,
    DomainExitError,
    FsError,
    InsufficientDataError,
    NearSingularError,
    SingularResolventError,
)
from .operators import (
    EffectiveOperator,
    FsParams,
    LiftedVector,
    coarse_hamiltonian,
    effective_interaction,
    lift,
    neumann_series,
    schur_exact_derivative,
    schur_exact_interaction,
    windowed_resolvent,
)
from .planewave import (
    Convention,
    FourierPotential,
    IndexWindow,
    PlanewaveBasis,
    kappa,
    laplacian_diagonal,
    load_potential,
    potential_block,
    regularity_norm,
    vt_potential,
)
