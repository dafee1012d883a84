# hocpde/solver.py
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, splu

from .exceptions import ConfigurationError, NonConvergenceError, OracleFailureError
from .models import Array, BoundaryClosure, CoefficientField, Grid2D, GridField, InnerSolver, SolutionState
from .operators import _FIRST_END, homogeneous, refresh_gradients
from .schemas import IterationReport, SolverConfig

logger = logging.getLogger(__name__)

ORACLE_MAX_UNKNOWNS = 20_000
# ratio of the compact to the second order symbol lies in [1, 2); 4/3 centres it
_PRECONDITIONER_SCALE = 4.0 / 3.0
_FIELDS = ("phi", "phi_x", "phi_y")


@dataclass(frozen=True)
class BlockSystem:
    """Coupled system over (phi, phi_x, phi_y) for one steady solve or one implicit time level.

    `weights[f, a, b]` multiplies field f (phi, phi_x, phi_y) at offset (a - 1, b - 1) from every
    interior node. `coefficients` are the implicit-level coefficients the weights were built from,
    scaled by `scale`, with `shift` added on the diagonal (identity part of a time step).
    """

    grid: Grid2D
    weights: Array
    rhs: Array
    boundary: GridField
    closure: BoundaryClosure
    coefficients: CoefficientField
    scale: float = 1.0
    shift: float = 0.0
    explicit: bool = False

    @property
    def unknowns(self) -> int:
        return (self.grid.M - 1) * (self.grid.N - 1)

    def with_interior(self, interior: Array) -> SolutionState:
        """Full state from interior phi values: Dirichlet boundary plus Padé gradients."""
        phi = self.boundary.copy()
        phi[1:-1, 1:-1] = interior
        phi_x, phi_y = refresh_gradients(phi, self.grid, self.closure)
        return SolutionState(self.grid, phi, phi_x, phi_y)

    def apply(self, state: SolutionState) -> Array:
        M, N = self.grid.M, self.grid.N
        out = np.zeros(self.grid.interior_shape)
        for f, name in enumerate(_FIELDS):
            values = getattr(state, name)
            for a in range(3):
                for b in range(3):
                    out += self.weights[f, a, b] * values[a : a + M - 1, b : b + N - 1]
        return out

    def reference_norm(self) -> float:
        """Infinity norm of the residual of the zero-interior guess."""
        zero = self.with_interior(np.zeros(self.grid.interior_shape))
        return float(np.max(np.abs(self.rhs - self.apply(zero))))


def residual(system: BlockSystem, state: SolutionState) -> Array:
    return system.rhs - system.apply(state)


def relative_residual(system: BlockSystem, state: SolutionState, reference: Optional[float] = None) -> float:
    ref = system.reference_norm() if reference is None else reference
    r = float(np.max(np.abs(residual(system, state))))
    return r / ref if ref > 0.0 else r


def _flat(values: Array) -> Array:
    return values.ravel(order="F")


def _unflat(vector: Array, shape: Tuple[int, int]) -> Array:
    return np.reshape(vector, shape, order="F")


def _nine_point(grid: Grid2D, stencil: Array) -> sp.csc_matrix:
    """Sparse matrix over interior nodes from per-node 3x3 weights (i fastest ordering)."""
    m, n = grid.interior_shape
    index = _unflat(np.arange(m * n), (m, n))
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            di, dj = a - 1, b - 1
            i0, i1 = max(0, -di), m - max(0, di)
            j0, j1 = max(0, -dj), n - max(0, dj)
            rows.append(index[i0:i1, j0:j1].ravel())
            cols.append(index[i0 + di : i1 + di, j0 + dj : j1 + dj].ravel())
            vals.append(stencil[a, b][i0:i1, j0:j1].ravel())
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m * n, m * n))


def preconditioner_stencil(system: BlockSystem) -> Array:
    c, g, s = system.coefficients, system.grid, system.scale * _PRECONDITIONER_SCALE
    a1, a2, b = c.interior("alpha1"), c.interior("alpha2"), c.interior("beta")
    c1, c2, d = c.interior("c1"), c.interior("c2"), c.interior("d")
    h, k = g.h, g.k
    w = np.zeros((3, 3) + g.interior_shape)
    w[1, 1] = system.shift + s * (2.0 * a1 / h**2 + 2.0 * a2 / k**2) + system.scale * d
    w[2, 1] = s * (-a1 / h**2 + c1 / (2.0 * h))
    w[0, 1] = s * (-a1 / h**2 - c1 / (2.0 * h))
    w[1, 2] = s * (-a2 / k**2 + c2 / (2.0 * k))
    w[1, 0] = s * (-a2 / k**2 - c2 / (2.0 * k))
    w[2, 2] = w[0, 0] = -s * b / (4.0 * h * k)
    w[2, 0] = w[0, 2] = s * b / (4.0 * h * k)
    return w


def preconditioner_matrix(system: BlockSystem) -> sp.csc_matrix:
    """Second order nine-point stencil over phi alone, used for the inner solves."""
    return _nine_point(system.grid, preconditioner_stencil(system))


class _Correction:
    """Linear part of the coupled operator acting on interior phi corrections."""

    def __init__(self, system: BlockSystem):
        self.system = system
        self.closure = homogeneous(system.closure)
        self.zero = np.zeros(system.grid.shape)

    def __call__(self, vector: Array) -> Array:
        g = self.system.grid
        phi = self.zero.copy()
        phi[1:-1, 1:-1] = _unflat(vector, g.interior_shape)
        phi_x, phi_y = refresh_gradients(phi, g, self.closure)
        return _flat(self.system.apply(SolutionState(g, phi, phi_x, phi_y)))


def _krylov_inner(system: BlockSystem, rhs: Array, factor, cfg: SolverConfig) -> Tuple[Array, int]:
    n = system.unknowns
    operator = LinearOperator((n, n), matvec=_Correction(system), dtype=float)
    preconditioner = LinearOperator((n, n), matvec=factor.solve, dtype=float)
    count = [0]

    def _tick(_):
        count[0] += 1

    x, info = bicgstab(
        operator, rhs, rtol=cfg.inner_tolerance, atol=0.0, maxiter=cfg.inner_max_iterations, M=preconditioner, callback=_tick
    )
    if info < 0 or not np.all(np.isfinite(x)):
        logger.warning(f"BiCGStab breakdown (info={info}); falling back to a preconditioner step")
        return factor.solve(rhs), count[0]
    if info > 0:
        logger.debug(f"BiCGStab stopped at the iteration cap {cfg.inner_max_iterations}")
    return x, count[0]


class _LineRelaxation:
    """Alternating x-line / y-line block Jacobi sweeps on the nine-point preconditioner."""

    def __init__(self, system: BlockSystem, matrix: sp.csc_matrix):
        w = preconditioner_stencil(system)
        self.matrix = matrix
        along_x, along_y = np.zeros_like(w), np.zeros_like(w)
        along_x[:, 1] = w[:, 1]
        along_y[1, :] = w[1, :]
        self.x_lines = splu(_nine_point(system.grid, along_x))
        self.y_lines = splu(_nine_point(system.grid, along_y))

    def solve(self, rhs: Array, tolerance: float, max_sweeps: int) -> Tuple[Array, int]:
        e = np.zeros_like(rhs)
        target = tolerance * float(np.max(np.abs(rhs)))
        for sweep in range(1, max_sweeps + 1):
            e += self.x_lines.solve(rhs - self.matrix @ e)
            e += self.y_lines.solve(rhs - self.matrix @ e)
            if float(np.max(np.abs(rhs - self.matrix @ e))) <= target:
                return e, sweep
        return e, max_sweeps


def solve_block(system: BlockSystem, initial_guess: Optional[SolutionState], cfg: SolverConfig) -> Tuple[SolutionState, IterationReport]:
    """Outer refinement on the full coupled residual; each correction from an inner solve.

    Convergence is judged on the relative infinity-norm residual of the coupled rows, with phi_x and
    phi_y always re-derived from phi by the Padé solves.
    """
    grid = system.grid
    if system.explicit:
        state = system.with_interior(system.rhs)
        return state, IterationReport(iterations=0, residual=relative_residual(system, state), residual_history=[])

    interior = np.zeros(grid.interior_shape) if initial_guess is None else initial_guess.phi[1:-1, 1:-1].copy()
    reference = system.reference_norm()
    matrix = preconditioner_matrix(system)
    factor = splu(matrix)
    relax = _LineRelaxation(system, matrix) if cfg.inner is InnerSolver.LINE_RELAX else None

    history: List[float] = []
    inner_total = 0
    for outer in range(1, cfg.max_outer + 1):
        state = system.with_interior(interior)
        r = residual(system, state)
        res = float(np.max(np.abs(r)))
        res = res / reference if reference > 0.0 else res
        history.append(res)
        logger.debug(f"outer {outer}: residual {res:.3e}")
        if not np.isfinite(res):
            raise NonConvergenceError(f"residual became non-finite after {outer} outer iterations on {grid.label()}", history)
        if len(history) > 1 and history[-1] > history[-2]:
            logger.warning(f"residual grew from {history[-2]:.3e} to {history[-1]:.3e} at outer iteration {outer} on {grid.label()}")
        if res <= cfg.tolerance:
            return state, IterationReport(iterations=outer, residual=res, residual_history=history, inner_iterations=inner_total)
        if relax is not None:
            e, used = relax.solve(_flat(r), cfg.inner_tolerance, cfg.inner_max_iterations)
        else:
            e, used = _krylov_inner(system, _flat(r), factor, cfg)
        inner_total += used
        interior = interior + cfg.relaxation * _unflat(e, grid.interior_shape)

    raise NonConvergenceError(
        f"block solve on {grid.label()} did not reach {cfg.tolerance:.1e} in {cfg.max_outer} outer iterations (last {history[-1]:.3e})",
        history,
    )


# ---------------------------------------------------------------------------
# monolithic direct oracle
# ---------------------------------------------------------------------------


class _Monolithic:
    def __init__(self, system: BlockSystem):
        g = system.grid
        self.M, self.N = g.M, g.N
        self.interior = (g.M - 1) * (g.N - 1)
        self.nodes = (g.M + 1) * (g.N + 1)
        self.size = self.interior + 2 * self.nodes
        self.boundary = system.boundary
        self.rows: List[int] = []
        self.cols: List[int] = []
        self.vals: List[float] = []
        self.b = np.zeros(self.size)

    def phi(self, i: int, j: int) -> Optional[int]:
        if 1 <= i <= self.M - 1 and 1 <= j <= self.N - 1:
            return (i - 1) + (j - 1) * (self.M - 1)
        return None

    def grad(self, field: int, i: int, j: int) -> int:
        return self.interior + field * self.nodes + i + j * (self.M + 1)

    def add(self, row: int, col: int, value: float) -> None:
        self.rows.append(row)
        self.cols.append(col)
        self.vals.append(value)

    def add_phi(self, row: int, i: int, j: int, value: float) -> None:
        col = self.phi(i, j)
        if col is None:
            self.b[row] -= value * self.boundary[i, j]
        else:
            self.add(row, col, value)

    def matrix(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.vals, (self.rows, self.cols)), shape=(self.size, self.size))


def _gradient_rows(sys: _Monolithic, field: int, spacing: float, normal, tangential) -> None:
    """Padé rows for phi_x (field 0) or phi_y (field 1) with the same closures as refresh_gradients."""
    M, N = sys.M, sys.N
    length, across = (M, N) if field == 0 else (N, M)

    def at(p, q):
        return (p, q) if field == 0 else (q, p)

    for q in range(across + 1):
        for p in range(length + 1):
            row = sys.grad(field, *at(p, q))
            if tangential is not None and q in (0, across):
                sys.add(row, row, 1.0)
                sys.b[row] = tangential[0 if q == 0 else 1][p]
                continue
            if p in (0, length):
                sys.add(row, row, 1.0)
                if normal is not None:
                    sys.b[row] = normal[0 if p == 0 else 1][q]
                    continue
                sign = 1.0 if p == 0 else -1.0
                for m, w in enumerate(_FIRST_END):
                    node = m if p == 0 else length - m
                    sys.add_phi(row, *at(node, q), -sign * w / (12.0 * spacing))
                continue
            sys.add(row, row, 4.0)
            sys.add(row, sys.grad(field, *at(p - 1, q)), 1.0)
            sys.add(row, sys.grad(field, *at(p + 1, q)), 1.0)
            sys.add_phi(row, *at(p + 1, q), -3.0 / spacing)
            sys.add_phi(row, *at(p - 1, q), 3.0 / spacing)


def dense_oracle_solve(system: BlockSystem) -> SolutionState:
    """Direct sparse LU of the monolithic matrix over phi, phi_x and phi_y."""
    g = system.grid
    sys = _Monolithic(system)
    if sys.size > ORACLE_MAX_UNKNOWNS:
        raise ConfigurationError(f"oracle limited to {ORACLE_MAX_UNKNOWNS} unknowns, {g.label()} needs {sys.size}")

    for j in range(1, g.N):
        for i in range(1, g.M):
            row = sys.phi(i, j)
            sys.b[row] += system.rhs[i - 1, j - 1]
            for a in range(3):
                for b in range(3):
                    ni, nj = i + a - 1, j + b - 1
                    sys.add_phi(row, ni, nj, system.weights[0, a, b, i - 1, j - 1])
                    for f in (0, 1):
                        w = system.weights[f + 1, a, b, i - 1, j - 1]
                        if w != 0.0:
                            sys.add(row, sys.grad(f, ni, nj), w)

    c = system.closure
    _gradient_rows(sys, 0, g.h, c.normal_x, c.tangential_x)
    _gradient_rows(sys, 1, g.k, c.normal_y, c.tangential_y)

    try:
        lu = splu(sys.matrix())
    except RuntimeError as e:
        logger.error(f"oracle factorization failed on {g.label()}: {e}")
        raise OracleFailureError(f"monolithic matrix is singular on {g.label()}: {e}") from e
    x = lu.solve(sys.b)
    if not np.all(np.isfinite(x)):
        raise OracleFailureError(f"oracle produced non-finite values on {g.label()}")

    phi = system.boundary.copy()
    phi[1:-1, 1:-1] = _unflat(x[: sys.interior], g.interior_shape)
    phi_x = _unflat(x[sys.interior : sys.interior + sys.nodes], g.shape)
    phi_y = _unflat(x[sys.interior + sys.nodes :], g.shape)
    return SolutionState(g, phi, phi_x, phi_y)
