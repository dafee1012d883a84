# hocpde/models.py
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Tuple
import enum

import numpy as np
import numpy.typing as npt

from .exceptions import InvalidGridError

Array = npt.NDArray[np.float64]
# (M+1)x(N+1) nodal values indexed [i, j] with i along the first computational direction
GridField = Array


class MappingKind(enum.Enum):
    IDENTITY = "identity"
    PROBLEM2_STRETCH = "problem2-stretch"
    LOG_POLAR = "log-polar"


class MetricProvenance(enum.Enum):
    ANALYTIC = "analytic"
    FINITE_DIFFERENCE = "finite-difference"


class InnerSolver(enum.Enum):
    KRYLOV = "krylov"
    LINE_RELAX = "line-relax"


class BoundaryKind(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    ROBIN = "robin"
    PERIODIC = "periodic"


class TimeScheme(enum.Enum):
    FORWARD_EULER = "forward-euler"
    CRANK_NICOLSON = "crank-nicolson"
    BACKWARD_EULER = "backward-euler"

    @property
    def iota(self) -> float:
        return {"forward-euler": 0.0, "crank-nicolson": 0.5, "backward-euler": 1.0}[self.value]


class Subcommand(enum.Enum):
    CONVERGENCE = "convergence"
    FIELD = "field"
    DISPERSION = "dispersion"
    STABILITY = "stability"
    NS_VORTEX = "ns-vortex"
    GRID = "grid"


def _frozen(values: Array) -> Array:
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class Grid2D:
    """Uniform node-centred grid on the computational rectangle (a1, a2) x (a3, a4)."""

    bounds: Tuple[float, float, float, float]
    M: int
    N: int

    def __post_init__(self):
        a1, a2, a3, a4 = self.bounds
        if self.M < 2 or self.N < 2:
            raise InvalidGridError(f"Grid needs at least 2 intervals per direction, got M={self.M}, N={self.N}")
        if not (a2 > a1 and a4 > a3):
            raise InvalidGridError(f"Degenerate grid bounds {self.bounds}")

    @property
    def h(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / self.M

    @property
    def k(self) -> float:
        return (self.bounds[3] - self.bounds[2]) / self.N

    @cached_property
    def x(self) -> Array:
        return _frozen(self.bounds[0] + np.arange(self.M + 1) * self.h)

    @cached_property
    def y(self) -> Array:
        return _frozen(self.bounds[2] + np.arange(self.N + 1) * self.k)

    @cached_property
    def mesh(self) -> Tuple[Array, Array]:
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return _frozen(X), _frozen(Y)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.M + 1, self.N + 1)

    @property
    def interior_shape(self) -> Tuple[int, int]:
        return (self.M - 1, self.N - 1)

    @property
    def node_count(self) -> int:
        return (self.M + 1) * (self.N + 1)

    def node(self, i: int, j: int) -> Tuple[float, float]:
        return float(self.x[i]), float(self.y[j])

    def boundary_mask(self) -> npt.NDArray[np.bool_]:
        mask = np.ones(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = False
        return mask

    def label(self) -> str:
        return f"{self.M + 1}x{self.N + 1}"


MapFn = Callable[[Array, Array], Tuple[Array, Array]]
MetricFn = Callable[[Array, Array], Tuple[Array, Array, Array, Array]]
HessianFn = Callable[[Array, Array], Tuple[Array, Array, Array, Array, Array, Array]]


@dataclass(frozen=True)
class Mapping:
    """Physical-to-computational map x = x(xi, eta), y = y(xi, eta).

    `metric` returns (x_xi, x_eta, y_xi, y_eta); `hessian` returns
    (x_xixi, x_xieta, x_etaeta, y_xixi, y_xieta, y_etaeta). Both are None for a
    finite-difference mapping, whose metrics are taken from nodal values of `forward`.
    """

    name: str
    forward: MapFn
    metric: Optional[MetricFn] = None
    hessian: Optional[HessianFn] = None
    provenance: MetricProvenance = MetricProvenance.ANALYTIC
    conformal: bool = False


@dataclass(frozen=True)
class MetricField:
    x_xi: Array
    x_eta: Array
    y_xi: Array
    y_eta: Array
    jacobian: Array
    xi_x: Array
    xi_y: Array
    eta_x: Array
    eta_y: Array
    xi_xx: Array
    xi_xy: Array
    xi_yy: Array
    eta_xx: Array
    eta_xy: Array
    eta_yy: Array

    @property
    def laplacian_xi(self) -> Array:
        return self.xi_xx + self.xi_yy

    @property
    def laplacian_eta(self) -> Array:
        return self.eta_xx + self.eta_yy


@dataclass(frozen=True)
class SolutionState:
    """The unknown triple (phi, phi_x, phi_y) carried by the compact scheme."""

    grid: Grid2D
    phi: GridField
    phi_x: GridField
    phi_y: GridField

    def __post_init__(self):
        for name in ("phi", "phi_x", "phi_y"):
            values = getattr(self, name)
            if values.shape != self.grid.shape:
                raise InvalidGridError(f"{name} has shape {values.shape}, grid {self.grid.label()} needs {self.grid.shape}")


@dataclass(frozen=True)
class CoefficientField:
    """Nodal samples of the PDE coefficients and forcing at one time level."""

    alpha1: GridField
    alpha2: GridField
    beta: GridField
    c1: GridField
    c2: GridField
    d: GridField
    s: GridField
    time: float = 0.0

    def positive_definite(self) -> bool:
        return bool(np.all(self.alpha1 > 0) and np.all(self.alpha2 > 0) and np.all(self.beta**2 < 4.0 * self.alpha1 * self.alpha2))

    def interior(self, name: str) -> Array:
        return getattr(self, name)[1:-1, 1:-1]

    def with_forcing(self, s: GridField) -> "CoefficientField":
        return CoefficientField(self.alpha1, self.alpha2, self.beta, self.c1, self.c2, self.d, s, self.time)


# boundary data in computational coordinates: g(xi, eta, t) and its (xi, eta) gradient
BoundaryFn = Callable[[Array, Array, float], Array]
BoundaryGradientFn = Callable[[Array, Array, float], Tuple[Array, Array]]


@dataclass(frozen=True)
class BoundarySpec:
    """b1*phi + b2*d_n phi = g on each edge (left, right, bottom, top)."""

    g: BoundaryFn
    gradient: Optional[BoundaryGradientFn] = None
    kinds: Tuple[BoundaryKind, BoundaryKind, BoundaryKind, BoundaryKind] = (BoundaryKind.DIRICHLET,) * 4
    b1: float = 1.0
    b2: float = 0.0


@dataclass(frozen=True)
class BoundaryClosure:
    """End conditions for the Padé systems.

    `normal_x` holds phi_x on the i=0 and i=M columns, `normal_y` phi_y on the j=0 and j=N rows;
    when absent they come from one-sided differences of phi. `tangential_x` holds phi_x on the
    j=0 and j=N rows and `tangential_y` phi_y on the i=0 and i=M columns; when present they
    replace the Padé values there.
    """

    normal_x: Optional[Tuple[Array, Array]] = None
    normal_y: Optional[Tuple[Array, Array]] = None
    tangential_x: Optional[Tuple[Array, Array]] = None
    tangential_y: Optional[Tuple[Array, Array]] = None


@dataclass(frozen=True)
class TransformedCoefficients:
    a1t: GridField
    e1t: GridField
    b1t: GridField
    c1t: GridField
    d1t: GridField
    f1t: GridField
    a2t: GridField
    e2t: GridField
    b2t: GridField
    c2t: GridField
    d2t: GridField

    def stream_function(self, time: float = 0.0) -> CoefficientField:
        zero = np.zeros_like(self.a1t)
        return CoefficientField(self.a1t, self.b1t, self.e1t, self.c1t, self.d1t, zero, self.f1t, time)

    def vorticity(self, time: float = 0.0) -> CoefficientField:
        zero = np.zeros_like(self.a2t)
        return CoefficientField(self.a2t, self.b2t, self.e2t, self.c2t, self.d2t, zero, zero.copy(), time)


@dataclass(frozen=True)
class FlowState:
    psi: SolutionState
    omega: SolutionState
    u: GridField
    v: GridField
    time: float = 0.0


PointFn = Callable[[Array, Array, float], Array]


@dataclass(frozen=True)
class CoefficientFunctions:
    """PDE coefficients and forcing as functions of physical (x, y, t)."""

    alpha1: PointFn
    alpha2: PointFn
    beta: PointFn
    c1: PointFn
    c2: PointFn
    d: PointFn
    s: PointFn
