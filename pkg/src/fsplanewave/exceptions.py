"""Exception hierarchy shared by all modules."""


class FsError(Exception):
    """Base class for errors raised by fsplanewave."""


class ConfigurationError(FsError, ValueError):
    """Inconsistent bases, malformed potential files or invalid parameters."""


class SingularResolventError(FsError, ArithmeticError):
    """The spectral parameter hits a Laplacian eigenvalue of the window."""


class DomainExitError(FsError, ValueError):
    """The spectral parameter left the admissible region below the window."""


class NearSingularError(FsError, ArithmeticError):
    """Factorization of a shifted complement operator failed.

    ``smallest_eigenvalue`` holds the lowest eigenvalue of the shifted
    operator found after the failure.
    """

    def __init__(self, message, smallest_eigenvalue=None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class ContractViolationError(FsError, ValueError):
    """Input violates a documented contract (e.g. non-Hermitian matrix)."""


class AlignmentError(FsError, ArithmeticError):
    """Approximate eigenvector has no overlap with the reference eigenspace."""


class InsufficientDataError(FsError, ValueError):
    """Too few valid points to fit a convergence rate."""
