# hocpde/problems.py
import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple, Union

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .grid import compute_metrics, identity_mapping, physical_nodes, problem2_mapping, pull_back
from .models import Array, BoundarySpec, CoefficientFunctions, Grid2D, GridField, Mapping, MappingKind, MetricField
from .schemas import ErrorNorms

logger = logging.getLogger(__name__)


class Jet(NamedTuple):
    """Exact solution and the derivatives that enter the PDE."""

    u: Array
    u_t: Array
    u_x: Array
    u_y: Array
    u_xx: Array
    u_xy: Array
    u_yy: Array


JetFn = Callable[[Array, Array, float], Jet]


def _constant(value: float):
    def fn(x, y, t):
        return np.full(np.shape(x), value, dtype=float)

    return fn


@dataclass(frozen=True)
class TestProblem:
    """A scalar convection-diffusion test case posed in physical coordinates."""

    __test__ = False

    name: str
    coefficients: CoefficientFunctions
    jet: Optional[JetFn]
    mapping: Mapping
    steady: bool = False
    grids: Tuple[int, ...] = (10, 20, 40)
    t_end: float = 0.25
    epsilon: Optional[float] = None

    def exact(self, x: Array, y: Array, t: float = 0.0) -> Array:
        if self.jet is None:
            raise ConfigurationError(f"{self.name} has no exact solution")
        return self.jet(x, y, t).u

    def forcing(self, x: Array, y: Array, t: float = 0.0) -> Array:
        """s = u_t + A u for the exact solution."""
        j = self.jet(x, y, t)
        c = self.coefficients
        u_t = np.zeros_like(j.u) if self.steady else j.u_t
        return (
            u_t
            - c.alpha1(x, y, t) * j.u_xx
            - c.beta(x, y, t) * j.u_xy
            - c.alpha2(x, y, t) * j.u_yy
            + c.c1(x, y, t) * j.u_x
            + c.c2(x, y, t) * j.u_y
            + c.d(x, y, t) * j.u
        )

    def coefficient_functions(self) -> CoefficientFunctions:
        c = self.coefficients
        return CoefficientFunctions(c.alpha1, c.alpha2, c.beta, c.c1, c.c2, c.d, self.forcing)

    def metrics(self, grid: Grid2D) -> Optional[MetricField]:
        if self.mapping.name == MappingKind.IDENTITY.value:
            return None
        return compute_metrics(self.mapping, grid)

    def boundary_spec(self) -> BoundarySpec:
        def gradient(x, y, t):
            j = self.jet(x, y, t)
            return j.u_x, j.u_y

        g, grad = pull_back(self.mapping, self.exact, gradient)
        return BoundarySpec(g=g, gradient=grad)

    def exact_on_grid(self, grid: Grid2D, t: float = 0.0) -> GridField:
        X, Y = physical_nodes(self.mapping, grid)
        return self.exact(X, Y, t)


# ---------------------------------------------------------------------------
# Problem 1: variable coefficients with a mixed derivative on the unit square
# ---------------------------------------------------------------------------


def _problem1_jet(x, y, t) -> Jet:
    E = np.exp(-np.pi * t)
    P = x**2 - y**2
    C, S = np.cosh(x + y), np.sinh(x + y)
    u = E * P * C
    return Jet(
        u=u,
        u_t=-np.pi * u,
        u_x=E * (2.0 * x * C + P * S),
        u_y=E * (-2.0 * y * C + P * S),
        u_xx=E * (2.0 * C + 4.0 * x * S + P * C),
        u_xy=E * (2.0 * (x - y) * S + P * C),
        u_yy=E * (-2.0 * C - 4.0 * y * S + P * C),
    )


def problem1() -> TestProblem:
    """u_t - u_xx + (1-x)(1-y)e^{x+y} u_xy - u_yy + 10x(1-y) u_x - 10y u_y = f."""
    coefficients = CoefficientFunctions(
        alpha1=_constant(1.0),
        alpha2=_constant(1.0),
        # the operator carries -beta u_xy
        beta=lambda x, y, t: -(1.0 - x) * (1.0 - y) * np.exp(x + y),
        c1=lambda x, y, t: 10.0 * x * (1.0 - y),
        c2=lambda x, y, t: -10.0 * y,
        d=_constant(0.0),
        s=_constant(0.0),
    )
    return TestProblem("problem1", coefficients, _problem1_jet, identity_mapping())


# ---------------------------------------------------------------------------
# Problem 2: boundary layer along a curved top wall
# ---------------------------------------------------------------------------


def _ratio(x):
    """R = (1 - 0.3 sin 6x) / (2 - 0.3 sin 6x) with R'/R and R''/R."""
    s6, c6 = np.sin(6.0 * x), np.cos(6.0 * x)
    a = 1.0 - 0.3 * s6
    b = a + 1.0
    a1, a2 = -1.8 * c6, 10.8 * s6
    R = a / b
    R1 = a1 / b**2
    R2 = a2 / b**2 - 2.0 * a1**2 / b**3
    return R, R1 / R, R2 / R


def _problem2_jet(epsilon: float) -> JetFn:
    p = 1.0 / epsilon

    def jet(x, y, t) -> Jet:
        R, r1, r2 = _ratio(x)
        one_y = 1.0 + y
        # (1+y)^{p+1} R^p overflows for small epsilon unless taken through the logarithm
        T = np.exp((p + 1.0) * np.log(one_y) + p * np.log(R))
        e = np.exp(y - x)
        return Jet(
            u=e + T,
            u_t=np.zeros_like(T),
            u_x=-e + T * p * r1,
            u_y=e + T * (p + 1.0) / one_y,
            u_xx=e + T * (p * (p - 1.0) * r1**2 + p * r2),
            u_xy=-e + T * (p + 1.0) * p * r1 / one_y,
            u_yy=e + T * (p + 1.0) * p / one_y**2,
        )

    return jet


def problem2(epsilon: float = 0.01, lam: float = 0.9) -> TestProblem:
    """-eps lap(psi) + (R'/R) psi_x + psi_y / (1 + y) = f on the stretched domain."""
    if epsilon <= 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    coefficients = CoefficientFunctions(
        alpha1=_constant(epsilon),
        alpha2=_constant(epsilon),
        beta=_constant(0.0),
        c1=lambda x, y, t: _ratio(x)[1],
        c2=lambda x, y, t: 1.0 / (1.0 + y),
        d=_constant(0.0),
        s=_constant(0.0),
    )
    return TestProblem(
        "problem2",
        coefficients,
        _problem2_jet(epsilon),
        problem2_mapping(lam),
        steady=True,
        grids=(64, 128),
        t_end=0.0,
        epsilon=epsilon,
    )


# ---------------------------------------------------------------------------
# decaying vortex array: an exact Navier-Stokes solution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NSProblem:
    name: str
    re: float

    @property
    def decay(self) -> float:
        return 2.0 * np.pi**2 / self.re

    def psi(self, x, y, t):
        return np.sin(np.pi * x) * np.sin(np.pi * y) * np.exp(-self.decay * t)

    def psi_gradient(self, x, y, t):
        e = np.exp(-self.decay * t)
        return np.pi * np.cos(np.pi * x) * np.sin(np.pi * y) * e, np.pi * np.sin(np.pi * x) * np.cos(np.pi * y) * e

    def omega(self, x, y, t):
        return 2.0 * np.pi**2 * self.psi(x, y, t)

    def omega_gradient(self, x, y, t):
        gx, gy = self.psi_gradient(x, y, t)
        return 2.0 * np.pi**2 * gx, 2.0 * np.pi**2 * gy

    def velocity(self, x, y, t):
        gx, gy = self.psi_gradient(x, y, t)
        return gy, -gx

    def boundary_specs(self, mapping: Mapping) -> Tuple[BoundarySpec, BoundarySpec]:
        g_psi, grad_psi = pull_back(mapping, self.psi, self.psi_gradient)
        g_omega, grad_omega = pull_back(mapping, self.omega, self.omega_gradient)
        return BoundarySpec(g=g_psi, gradient=grad_psi), BoundarySpec(g=g_omega, gradient=grad_omega)


def vortex_decay(re: float = 100.0) -> NSProblem:
    if re <= 0.0:
        raise DomainError(f"Reynolds number must be positive, got {re}")
    return NSProblem("ns-vortex", re)


def problem_by_name(name: str, epsilon: float = 0.01, re: float = 100.0, lam: float = 0.9) -> Union[TestProblem, NSProblem]:
    if name == "problem1":
        return problem1()
    if name == "problem2":
        return problem2(epsilon, lam)
    if name == "ns-vortex":
        return vortex_decay(re)
    raise ConfigurationError(f"unknown problem {name!r}; choose from problem1, problem2, ns-vortex")


# ---------------------------------------------------------------------------
# error measurement
# ---------------------------------------------------------------------------


def error_norms(numerical: GridField, exact: Union[GridField, Callable[[Array, Array], Array]], grid: Grid2D) -> ErrorNorms:
    """Mean, root-mean-square and maximum of |numerical - exact| over every node."""
    if callable(exact):
        X, Y = grid.mesh
        exact = exact(X, Y)
    exact = np.asarray(exact, dtype=float)
    if numerical.shape != grid.shape or exact.shape != grid.shape:
        raise DomainError(f"error norms need {grid.shape} fields, got {numerical.shape} and {exact.shape}")
    e = np.abs(numerical - exact)
    return ErrorNorms(l1=float(np.mean(e)), l2=float(np.sqrt(np.mean(e**2))), linf=float(np.max(e)))


def convergence_order(err_coarse: float, err_fine: float) -> float:
    if err_coarse <= 0.0 or err_fine <= 0.0:
        raise DomainError(f"order undefined for errors {err_coarse} and {err_fine}")
    return float(np.log2(err_coarse / err_fine))
