# hocpde/exceptions.py
from typing import List, Optional


class HocError(Exception):
    """Base class for every error raised by the solver library."""


class ConfigurationError(HocError):
    pass


class InvalidGridError(ConfigurationError):
    pass


class NonMonotoneMappingError(ConfigurationError):
    pass


class UnsupportedBoundaryError(ConfigurationError):
    pass


class DomainError(HocError):
    pass


class IllPosedProblemError(DomainError):
    """Diffusion matrix is not positive definite somewhere on the grid."""


class SingularMappingError(HocError):
    pass


class OutOfStencilError(HocError):
    pass


class SingularAmplificationError(HocError):
    pass


class SolverError(HocError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])

    @property
    def last_residual(self) -> Optional[float]:
        return self.residual_history[-1] if self.residual_history else None


class CouplingError(NonConvergenceError):
    """Vorticity / stream function inner loop did not settle within the iteration limit."""


class OracleFailureError(SolverError):
    pass
