"""Fourth-order compact finite differences for 2D convection-diffusion problems with mixed derivatives."""

from .exceptions import HocError
from .models import Grid2D, SolutionState
from .schemas import RunConfig, SolverConfig, TimeIntegratorConfig

__version__ = "0.1.0"

__all__ = ["Grid2D", "HocError", "RunConfig", "SolutionState", "SolverConfig", "TimeIntegratorConfig", "__version__"]
