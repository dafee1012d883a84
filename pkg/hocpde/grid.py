# hocpde/grid.py
import logging
from typing import Callable, Optional, Tuple

import numpy as np

from .exceptions import ConfigurationError, IllPosedProblemError, NonMonotoneMappingError, SingularMappingError
from .models import (
    Array,
    CoefficientField,
    CoefficientFunctions,
    Grid2D,
    GridField,
    MapFn,
    Mapping,
    MappingKind,
    MetricField,
    MetricProvenance,
    TransformedCoefficients,
)
from .operators import one_sided_derivative, one_sided_second_derivative

logger = logging.getLogger(__name__)


def build_uniform_grid(bounds: Tuple[float, float, float, float], M: int, N: int) -> Grid2D:
    return Grid2D(tuple(float(b) for b in bounds), int(M), int(N))


# ---------------------------------------------------------------------------
# mappings
# ---------------------------------------------------------------------------


def identity_mapping() -> Mapping:
    def forward(xi, eta):
        return np.asarray(xi, dtype=float).copy(), np.asarray(eta, dtype=float).copy()

    def metric(xi, eta):
        one, zero = np.ones_like(xi, dtype=float), np.zeros_like(xi, dtype=float)
        return one, zero, zero.copy(), one.copy()

    def hessian(xi, eta):
        zero = np.zeros_like(xi, dtype=float)
        return tuple(zero.copy() for _ in range(6))

    return Mapping(MappingKind.IDENTITY.value, forward, metric, hessian, conformal=True)


def problem2_mapping(lam: float = 0.9) -> Mapping:
    """x = xi, y = (eta + (lam/pi) sin(pi eta)) / (1 - 0.3 sin(6 xi)).

    Stretches nodes towards the top wall, where the boundary layer of the stretched problem sits.
    """
    if not 0.0 <= lam < 1.0:
        raise NonMonotoneMappingError(f"stretch parameter lambda={lam} must lie in [0, 1)")

    def g(eta):
        return eta + (lam / np.pi) * np.sin(np.pi * eta), 1.0 + lam * np.cos(np.pi * eta), -lam * np.pi * np.sin(np.pi * eta)

    def D(xi):
        return 1.0 - 0.3 * np.sin(6.0 * xi), -1.8 * np.cos(6.0 * xi), 10.8 * np.sin(6.0 * xi)

    def forward(xi, eta):
        return np.asarray(xi, dtype=float).copy(), g(eta)[0] / D(xi)[0]

    def metric(xi, eta):
        g0, g1, _ = g(eta)
        d0, d1, _ = D(xi)
        one = np.ones_like(xi * eta, dtype=float)
        return one, np.zeros_like(one), -g0 * d1 / d0**2, g1 / d0

    def hessian(xi, eta):
        g0, g1, g2 = g(eta)
        d0, d1, d2 = D(xi)
        zero = np.zeros_like(xi * eta, dtype=float)
        y_xixi = g0 * (2.0 * d1**2 / d0**3 - d2 / d0**2)
        y_xieta = -g1 * d1 / d0**2
        y_etaeta = g2 / d0
        return zero, zero.copy(), zero.copy(), y_xixi, y_xieta, y_etaeta

    return Mapping(MappingKind.PROBLEM2_STRETCH.value, forward, metric, hessian)


def log_polar_mapping(scale: float = 0.5) -> Mapping:
    """x = scale e^{pi xi} cos(pi eta), y = scale e^{pi xi} sin(pi eta); conformal."""

    def forward(xi, eta):
        r = scale * np.exp(np.pi * xi)
        return r * np.cos(np.pi * eta), r * np.sin(np.pi * eta)

    def metric(xi, eta):
        x, y = forward(xi, eta)
        xx, yy = np.pi * x, np.pi * y
        return xx, -yy, yy, xx

    def hessian(xi, eta):
        x, y = forward(xi, eta)
        p2 = np.pi**2
        return p2 * x, -p2 * y, -p2 * x, p2 * y, p2 * x, -p2 * y

    return Mapping(MappingKind.LOG_POLAR.value, forward, metric, hessian, conformal=True)


def finite_difference_mapping(forward: MapFn, name: str = "finite-difference") -> Mapping:
    """A mapping known only through its forward function; metrics come from nodal differences."""
    return Mapping(name, forward, provenance=MetricProvenance.FINITE_DIFFERENCE)


def mapping_by_name(kind, lam: float = 0.9, scale: float = 0.5) -> Mapping:
    try:
        kind = MappingKind(getattr(kind, "value", kind))
    except ValueError as e:
        raise ConfigurationError(f"unknown mapping {kind!r}; choose from {[m.value for m in MappingKind]}") from e
    if kind is MappingKind.IDENTITY:
        return identity_mapping()
    if kind is MappingKind.PROBLEM2_STRETCH:
        return problem2_mapping(lam)
    return log_polar_mapping(scale)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def physical_nodes(mapping: Mapping, grid: Grid2D) -> Tuple[Array, Array]:
    XI, ETA = grid.mesh
    return mapping.forward(XI, ETA)


def _nodal_metric(mapping: Mapping, grid: Grid2D):
    XI, ETA = grid.mesh
    if mapping.metric is not None:
        first = tuple(np.broadcast_to(np.asarray(a, dtype=float), grid.shape).copy() for a in mapping.metric(XI, ETA))
    else:
        X, Y = mapping.forward(XI, ETA)
        first = (
            one_sided_derivative(X, grid.h, axis=0),
            one_sided_derivative(X, grid.k, axis=1),
            one_sided_derivative(Y, grid.h, axis=0),
            one_sided_derivative(Y, grid.k, axis=1),
        )
    if mapping.hessian is not None and mapping.metric is not None:
        second = tuple(np.broadcast_to(np.asarray(a, dtype=float), grid.shape).copy() for a in mapping.hessian(XI, ETA))
    else:
        X, Y = mapping.forward(XI, ETA)
        second = []
        for values, along_xi in ((X, first[0]), (Y, first[2])):
            second += [
                one_sided_second_derivative(values, grid.h, axis=0),
                one_sided_derivative(along_xi, grid.k, axis=1),
                one_sided_second_derivative(values, grid.k, axis=1),
            ]
        second = tuple(second)
    return first, second


def compute_metrics(mapping: Mapping, grid: Grid2D) -> MetricField:
    """Forward and inverse metric terms at every node, including second derivatives of (xi, eta)(x, y)."""
    (x_xi, x_eta, y_xi, y_eta), hess = _nodal_metric(mapping, grid)
    J = x_xi * y_eta - x_eta * y_xi
    scale = max(float(np.max(np.abs(J))), np.finfo(float).tiny)
    if not np.all(np.isfinite(J)) or np.any(np.abs(J) <= 1e-14 * scale):
        bad = np.argwhere(~np.isfinite(J) | (np.abs(J) <= 1e-14 * scale))[0]
        raise SingularMappingError(f"mapping {mapping.name!r} has a vanishing Jacobian at node {tuple(int(b) for b in bad)}")

    xi_x, xi_y = y_eta / J, -x_eta / J
    eta_x, eta_y = -y_xi / J, x_xi / J

    # d2(xi^m)/dx_a dx_b = -K[m, l] X^l_pq K[p, a] K[q, b], with K the inverse Jacobian matrix
    def contracted(h_pp, h_pq, h_qq):
        xx = h_pp * xi_x**2 + 2.0 * h_pq * xi_x * eta_x + h_qq * eta_x**2
        xy = h_pp * xi_x * xi_y + h_pq * (xi_x * eta_y + eta_x * xi_y) + h_qq * eta_x * eta_y
        yy = h_pp * xi_y**2 + 2.0 * h_pq * xi_y * eta_y + h_qq * eta_y**2
        return xx, xy, yy

    tx = contracted(*hess[:3])
    ty = contracted(*hess[3:])
    xi_second = tuple(-(xi_x * a + xi_y * b) for a, b in zip(tx, ty))
    eta_second = tuple(-(eta_x * a + eta_y * b) for a, b in zip(tx, ty))
    logger.debug(f"Metrics for {mapping.name} on {grid.label()}: J in [{np.min(J):.4g}, {np.max(J):.4g}]")
    return MetricField(x_xi, x_eta, y_xi, y_eta, J, xi_x, xi_y, eta_x, eta_y, *xi_second, *eta_second)


# ---------------------------------------------------------------------------
# transformed equations
# ---------------------------------------------------------------------------


def _sample(fn: Callable, X: Array, Y: Array, t: float) -> Array:
    return np.broadcast_to(np.asarray(fn(X, Y, t), dtype=float), X.shape).copy()


def transform_scalar_pde(
    mapping: Mapping,
    grid: Grid2D,
    physical_coeffs: CoefficientFunctions,
    t: float = 0.0,
    metrics: Optional[MetricField] = None,
) -> CoefficientField:
    """Coefficients of the equivalent equation in (xi, eta) on the computational rectangle."""
    m = metrics if metrics is not None else compute_metrics(mapping, grid)
    X, Y = physical_nodes(mapping, grid)
    a1, a2, b = (_sample(getattr(physical_coeffs, n), X, Y, t) for n in ("alpha1", "alpha2", "beta"))
    c1, c2, d, s = (_sample(getattr(physical_coeffs, n), X, Y, t) for n in ("c1", "c2", "d", "s"))

    A1 = a1 * m.xi_x**2 + b * m.xi_x * m.xi_y + a2 * m.xi_y**2
    B = 2.0 * a1 * m.xi_x * m.eta_x + b * (m.xi_x * m.eta_y + m.xi_y * m.eta_x) + 2.0 * a2 * m.xi_y * m.eta_y
    A2 = a1 * m.eta_x**2 + b * m.eta_x * m.eta_y + a2 * m.eta_y**2
    C1 = -(a1 * m.xi_xx + b * m.xi_xy + a2 * m.xi_yy) + c1 * m.xi_x + c2 * m.xi_y
    C2 = -(a1 * m.eta_xx + b * m.eta_xy + a2 * m.eta_yy) + c1 * m.eta_x + c2 * m.eta_y

    field = CoefficientField(A1, A2, B, C1, C2, d, s, t)
    if not field.positive_definite():
        raise IllPosedProblemError(f"transformed diffusion for {mapping.name} is not positive definite on {grid.label()}")
    return field


def sample_physical(physical_coeffs: CoefficientFunctions, grid: Grid2D, t: float = 0.0) -> CoefficientField:
    X, Y = grid.mesh
    return CoefficientField(*(_sample(getattr(physical_coeffs, n), X, Y, t) for n in ("alpha1", "alpha2", "beta", "c1", "c2", "d", "s")), t)


def transform_ns_coefficients(metrics: MetricField, re: float, u: GridField, v: GridField, omega: GridField) -> TransformedCoefficients:
    """Coefficients of the stream function and vorticity equations in (xi, eta)."""
    m = metrics
    a1t = m.xi_x**2 + m.xi_y**2
    e1t = 2.0 * (m.xi_x * m.eta_x + m.xi_y * m.eta_y)
    b1t = m.eta_x**2 + m.eta_y**2
    c1t = -m.laplacian_xi
    d1t = -m.laplacian_eta
    c2t = c1t / re + u * m.xi_x + v * m.xi_y
    d2t = d1t / re + u * m.eta_x + v * m.eta_y
    return TransformedCoefficients(a1t, e1t, b1t, c1t, d1t, np.array(omega, dtype=float), a1t / re, e1t / re, b1t / re, c2t, d2t)


def pull_back(
    mapping: Mapping,
    fn: Callable[[Array, Array, float], Array],
    grad_fn: Optional[Callable[[Array, Array, float], Tuple[Array, Array]]] = None,
):
    """Express physical data f(x, y, t) and its gradient in computational coordinates.

    Returns (g, gradient) where g(xi, eta, t) = f(x(xi, eta), y(xi, eta), t) and gradient gives
    (g_xi, g_eta) by the chain rule; gradient is None when the mapping has no analytic metric or
    grad_fn is not given.
    """

    def g(xi, eta, t):
        x, y = mapping.forward(xi, eta)
        return fn(x, y, t)

    if grad_fn is None or mapping.metric is None:
        return g, None

    def gradient(xi, eta, t):
        x, y = mapping.forward(xi, eta)
        fx, fy = grad_fn(x, y, t)
        x_xi, x_eta, y_xi, y_eta = mapping.metric(xi, eta)
        return fx * x_xi + fy * y_xi, fx * x_eta + fy * y_eta

    return g, gradient
