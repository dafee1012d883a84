# hocpde/operators.py
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded, solve_circulant

from .exceptions import ConfigurationError, InvalidGridError, OutOfStencilError, SolverError
from .models import Array, BoundaryClosure, GridField, Grid2D, SolutionState

logger = logging.getLogger(__name__)

# fourth order one-sided weights, numerators over 12h and 12h^2
_FIRST_END = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
_FIRST_NEAR = np.array([-3.0, -10.0, 18.0, -6.0, 1.0])  # offsets -1..3
_FIRST_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0])  # offsets -2..2
_SECOND_END = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0])
_SECOND_NEAR = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0])  # offsets -1..4
_SECOND_CENTRAL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0])


# ---------------------------------------------------------------------------
# central differences, whole interior at once
# ---------------------------------------------------------------------------


def dx(f: Array, h: float) -> Array:
    return (f[2:, 1:-1] - f[:-2, 1:-1]) / (2.0 * h)


def dy(f: Array, k: float) -> Array:
    return (f[1:-1, 2:] - f[1:-1, :-2]) / (2.0 * k)


def dxx(f: Array, h: float) -> Array:
    return (f[2:, 1:-1] - 2.0 * f[1:-1, 1:-1] + f[:-2, 1:-1]) / h**2


def dyy(f: Array, k: float) -> Array:
    return (f[1:-1, 2:] - 2.0 * f[1:-1, 1:-1] + f[1:-1, :-2]) / k**2


def dxdy(f: Array, h: float, k: float) -> Array:
    return (f[2:, 2:] - f[2:, :-2] - f[:-2, 2:] + f[:-2, :-2]) / (4.0 * h * k)


def _window(f: GridField, i: int, j: int) -> Array:
    M, N = f.shape[0] - 1, f.shape[1] - 1
    if not (1 <= i <= M - 1 and 1 <= j <= N - 1):
        raise OutOfStencilError(f"node ({i}, {j}) is not interior to a {M + 1}x{N + 1} grid")
    return f[i - 1 : i + 2, j - 1 : j + 2]


def delta_x(f: GridField, grid: Grid2D, i: int, j: int) -> float:
    return float(dx(_window(f, i, j), grid.h)[0, 0])


def delta_y(f: GridField, grid: Grid2D, i: int, j: int) -> float:
    return float(dy(_window(f, i, j), grid.k)[0, 0])


def delta_xx(f: GridField, grid: Grid2D, i: int, j: int) -> float:
    return float(dxx(_window(f, i, j), grid.h)[0, 0])


def delta_yy(f: GridField, grid: Grid2D, i: int, j: int) -> float:
    return float(dyy(_window(f, i, j), grid.k)[0, 0])


def delta_xy(f: GridField, grid: Grid2D, i: int, j: int) -> float:
    return float(dxdy(_window(f, i, j), grid.h, grid.k)[0, 0])


# ---------------------------------------------------------------------------
# fourth order explicit differences on every node (metrics, diagnostics)
# ---------------------------------------------------------------------------


def _apply_rows(v: Array, spacing: float, end: Array, near: Array, central: Array, power: int) -> Array:
    n = v.shape[0]
    out = np.empty_like(v, dtype=float)
    half = len(central) // 2
    out[half:-half] = sum(w * v[m : n - 2 * half + m] for m, w in enumerate(central))
    out[0] = sum(w * v[m] for m, w in enumerate(end))
    out[1] = sum(w * v[m] for m, w in enumerate(near))
    sign = -1.0 if power == 1 else 1.0
    out[-1] = sign * sum(w * v[n - 1 - m] for m, w in enumerate(end))
    out[-2] = sign * sum(w * v[n - 1 - m] for m, w in enumerate(near))
    return out / (12.0 * spacing**power)


def one_sided_derivative(values: Array, spacing: float, axis: int = 0) -> Array:
    """Fourth order first derivative along `axis`, one-sided at the two ends of each line."""
    moved = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if moved.shape[0] < 5:
        raise InvalidGridError(f"fourth order differences need 5 nodes, got {moved.shape[0]}")
    return np.moveaxis(_apply_rows(moved, spacing, _FIRST_END, _FIRST_NEAR, _FIRST_CENTRAL, 1), 0, axis)


def one_sided_second_derivative(values: Array, spacing: float, axis: int = 0) -> Array:
    moved = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if moved.shape[0] < 6:
        raise InvalidGridError(f"fourth order second differences need 6 nodes, got {moved.shape[0]}")
    return np.moveaxis(_apply_rows(moved, spacing, _SECOND_END, _SECOND_NEAR, _SECOND_CENTRAL, 2), 0, axis)


def end_slopes(phi: Array, spacing: float) -> Tuple[Array, Array]:
    """One-sided fourth order slopes at the first and last node along axis 0."""
    start = sum(w * phi[m] for m, w in enumerate(_FIRST_END)) / (12.0 * spacing)
    end = -sum(w * phi[-1 - m] for m, w in enumerate(_FIRST_END)) / (12.0 * spacing)
    return start, end


# ---------------------------------------------------------------------------
# Padé gradients
# ---------------------------------------------------------------------------


def _pade_lines(phi: Array, spacing: float, ends: Optional[Tuple[Array, Array]]) -> Array:
    """Solve g[i-1] + 4 g[i] + g[i+1] = 3 (phi[i+1] - phi[i-1]) / spacing along axis 0, all lines at once."""
    n = phi.shape[0]
    if n < 5:
        raise InvalidGridError(f"Padé gradients need at least 4 intervals, got {n - 1}")
    start, end = ends if ends is not None else end_slopes(phi, spacing)
    rhs = 3.0 * (phi[2:] - phi[:-2]) / spacing
    rhs[0] -= start
    rhs[-1] -= end
    bands = np.empty((3, n - 2))
    bands[0], bands[1], bands[2] = 1.0, 4.0, 1.0
    bands[0, 0] = bands[2, -1] = 0.0
    try:
        inner = solve_banded((1, 1), bands, rhs)
    except (LinAlgError, ValueError) as e:
        logger.error(f"Padé line solve failed: {e}")
        raise SolverError(f"Padé line solve failed: {e}") from e
    return np.concatenate([np.atleast_2d(start), inner, np.atleast_2d(end)], axis=0)


def pade_gradient_x(phi: GridField, grid: Grid2D, closure: Optional[BoundaryClosure]) -> GridField:
    if closure is None:
        raise ConfigurationError("Padé gradient requested without a boundary closure")
    return _pade_lines(phi, grid.h, closure.normal_x)


def pade_gradient_y(phi: GridField, grid: Grid2D, closure: Optional[BoundaryClosure]) -> GridField:
    if closure is None:
        raise ConfigurationError("Padé gradient requested without a boundary closure")
    ends = None if closure.normal_y is None else tuple(np.asarray(e) for e in closure.normal_y)
    return _pade_lines(phi.T, grid.k, ends).T


def refresh_gradients(phi: GridField, grid: Grid2D, closure: BoundaryClosure) -> Tuple[GridField, GridField]:
    """Padé gradients of phi, with given tangential boundary derivatives written over the boundary lines."""
    phi_x = pade_gradient_x(phi, grid, closure)
    phi_y = pade_gradient_y(phi, grid, closure)
    if closure.tangential_x is not None:
        phi_x[:, 0], phi_x[:, -1] = closure.tangential_x
    if closure.tangential_y is not None:
        phi_y[0, :], phi_y[-1, :] = closure.tangential_y
    return phi_x, phi_y


def homogeneous(closure: BoundaryClosure) -> BoundaryClosure:
    """Closure satisfied by corrections: every prescribed value becomes zero."""

    def _zero(pair):
        return None if pair is None else tuple(np.zeros_like(np.asarray(p, dtype=float)) for p in pair)

    return BoundaryClosure(_zero(closure.normal_x), _zero(closure.normal_y), _zero(closure.tangential_x), _zero(closure.tangential_y))


def state_with_gradients(phi: GridField, grid: Grid2D, closure: BoundaryClosure) -> SolutionState:
    phi_x, phi_y = refresh_gradients(phi, grid, closure)
    return SolutionState(grid, phi, phi_x, phi_y)


# ---------------------------------------------------------------------------
# compact second derivatives
# ---------------------------------------------------------------------------


def compact_second_x_field(state: SolutionState) -> Array:
    h = state.grid.h
    return 2.0 * dxx(state.phi, h) - dx(state.phi_x, h)


def compact_second_y_field(state: SolutionState) -> Array:
    k = state.grid.k
    return 2.0 * dyy(state.phi, k) - dy(state.phi_y, k)


def compact_mixed_field(state: SolutionState) -> Array:
    g = state.grid
    return dx(state.phi_y, g.h) + dy(state.phi_x, g.k) - dxdy(state.phi, g.h, g.k)


def compact_second_x(state: SolutionState, i: int, j: int) -> float:
    g = state.grid
    return 2.0 * delta_xx(state.phi, g, i, j) - delta_x(state.phi_x, g, i, j)


def compact_second_y(state: SolutionState, i: int, j: int) -> float:
    g = state.grid
    return 2.0 * delta_yy(state.phi, g, i, j) - delta_y(state.phi_y, g, i, j)


def compact_mixed(state: SolutionState, i: int, j: int) -> float:
    g = state.grid
    return delta_x(state.phi_y, g, i, j) + delta_y(state.phi_x, g, i, j) - delta_xy(state.phi, g, i, j)


# ---------------------------------------------------------------------------
# doubly periodic counterparts, fields of shape (M, N) without the repeated end node
# ---------------------------------------------------------------------------


def _shift(f: Array, offset: int, axis: int) -> Array:
    # value at index + offset
    return np.roll(f, -offset, axis=axis)


def pade_gradient_periodic(phi: Array, spacing: float, axis: int = 0) -> Array:
    n = phi.shape[axis]
    if n < 3:
        raise InvalidGridError(f"periodic Padé gradient needs at least 3 nodes, got {n}")
    column = np.zeros(n)
    column[0], column[1], column[-1] = 4.0, 1.0, 1.0
    rhs = 3.0 * (_shift(phi, 1, axis) - _shift(phi, -1, axis)) / spacing
    return solve_circulant(column, rhs, baxis=axis, outaxis=axis)


def apply_periodic_operator(coefficients, phi: Array, h: float, k: float) -> Array:
    """Compact operator A applied to a periodic field with constant coefficients.

    `coefficients` carries alpha1, alpha2, beta, c1, c2, d as attributes.
    """
    c = coefficients
    phi_x = pade_gradient_periodic(phi, h, axis=0)
    phi_y = pade_gradient_periodic(phi, k, axis=1)

    def px(f):
        return (_shift(f, 1, 0) - _shift(f, -1, 0)) / (2.0 * h)

    def py(f):
        return (_shift(f, 1, 1) - _shift(f, -1, 1)) / (2.0 * k)

    pxx = (_shift(phi, 1, 0) - 2.0 * phi + _shift(phi, -1, 0)) / h**2
    pyy = (_shift(phi, 1, 1) - 2.0 * phi + _shift(phi, -1, 1)) / k**2
    pxy = py(px(phi))
    second_x = 2.0 * pxx - px(phi_x)
    second_y = 2.0 * pyy - py(phi_y)
    mixed = px(phi_y) + py(phi_x) - pxy
    return -c.alpha1 * second_x - c.beta * mixed - c.alpha2 * second_y + c.c1 * phi_x + c.c2 * phi_y + c.d * phi
