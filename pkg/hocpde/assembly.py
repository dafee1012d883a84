# hocpde/assembly.py
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres
from tqdm import tqdm

from .exceptions import ConfigurationError, IllPosedProblemError, NonConvergenceError, OutOfStencilError, UnsupportedBoundaryError
from .grid import sample_physical, transform_scalar_pde
from .models import (
    Array,
    BoundaryClosure,
    BoundaryKind,
    BoundarySpec,
    CoefficientField,
    CoefficientFunctions,
    Grid2D,
    GridField,
    Mapping,
    MappingKind,
    SolutionState,
)
from .operators import (
    apply_periodic_operator,
    compact_mixed_field,
    compact_second_x_field,
    compact_second_y_field,
    state_with_gradients,
)
from .schemas import IterationReport, SolverConfig, TimeIntegratorConfig
from .solver import BlockSystem, solve_block

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# discrete operator
# ---------------------------------------------------------------------------


def apply_discrete_operator_field(coeffs: CoefficientField, state: SolutionState) -> Array:
    """A_{h,k} phi on every interior node."""
    c = coeffs
    return (
        -c.interior("alpha1") * compact_second_x_field(state)
        - c.interior("beta") * compact_mixed_field(state)
        - c.interior("alpha2") * compact_second_y_field(state)
        + c.interior("c1") * state.phi_x[1:-1, 1:-1]
        + c.interior("c2") * state.phi_y[1:-1, 1:-1]
        + c.interior("d") * state.phi[1:-1, 1:-1]
    )


def apply_discrete_operator(coeffs: CoefficientField, state: SolutionState, i: int, j: int) -> float:
    M, N = state.grid.M, state.grid.N
    if not (1 <= i <= M - 1 and 1 <= j <= N - 1):
        raise OutOfStencilError(f"node ({i}, {j}) is not interior to {state.grid.label()}")
    return float(apply_discrete_operator_field(coeffs, state)[i - 1, j - 1])


def stencil_weights(coeffs: CoefficientField, grid: Grid2D) -> Array:
    """Per-node weights [field, a, b] of A_{h,k} on (phi, phi_x, phi_y) at offset (a-1, b-1)."""
    a1, a2, b = coeffs.interior("alpha1"), coeffs.interior("alpha2"), coeffs.interior("beta")
    c1, c2, d = coeffs.interior("c1"), coeffs.interior("c2"), coeffs.interior("d")
    h, k = grid.h, grid.k
    w = np.zeros((3, 3, 3) + grid.interior_shape)

    w[0, 1, 1] = 4.0 * a1 / h**2 + 4.0 * a2 / k**2 + d
    w[0, 0, 1] = w[0, 2, 1] = -2.0 * a1 / h**2
    w[0, 1, 0] = w[0, 1, 2] = -2.0 * a2 / k**2
    w[0, 2, 2] = w[0, 0, 0] = b / (4.0 * h * k)
    w[0, 2, 0] = w[0, 0, 2] = -b / (4.0 * h * k)

    w[1, 2, 1], w[1, 0, 1] = a1 / (2.0 * h), -a1 / (2.0 * h)
    w[1, 1, 2], w[1, 1, 0] = -b / (2.0 * k), b / (2.0 * k)
    w[1, 1, 1] = c1

    w[2, 1, 2], w[2, 1, 0] = a2 / (2.0 * k), -a2 / (2.0 * k)
    w[2, 2, 1], w[2, 0, 1] = -b / (2.0 * h), b / (2.0 * h)
    w[2, 1, 1] = c2
    return w


# ---------------------------------------------------------------------------
# boundary data
# ---------------------------------------------------------------------------


def _check_dirichlet(bc: BoundarySpec) -> None:
    unsupported = [kind.value for kind in bc.kinds if kind is not BoundaryKind.DIRICHLET]
    if unsupported:
        raise UnsupportedBoundaryError(f"only Dirichlet edges are assembled, got {unsupported}")


def boundary_values(bc: BoundarySpec, grid: Grid2D, t: float) -> GridField:
    """Field holding g on the boundary nodes and zero inside."""
    XI, ETA = grid.mesh
    g = np.broadcast_to(np.asarray(bc.g(XI, ETA, t), dtype=float), grid.shape)
    out = np.where(grid.boundary_mask(), g, 0.0)
    return out


def boundary_closure(bc: BoundarySpec, grid: Grid2D, t: float) -> BoundaryClosure:
    """Padé closure at time t: analytic tangential derivatives when the data carry a gradient."""
    if bc.gradient is None:
        return BoundaryClosure()
    XI, ETA = grid.mesh
    g_xi, g_eta = (np.broadcast_to(np.asarray(a, dtype=float), grid.shape) for a in bc.gradient(XI, ETA, t))
    return BoundaryClosure(
        tangential_x=(g_xi[:, 0].copy(), g_xi[:, -1].copy()),
        tangential_y=(g_eta[0, :].copy(), g_eta[-1, :].copy()),
    )


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------


def _require_positive_definite(coeffs: CoefficientField, grid: Grid2D) -> None:
    if not coeffs.positive_definite():
        disc = coeffs.beta**2 - 4.0 * coeffs.alpha1 * coeffs.alpha2
        worst = np.unravel_index(int(np.argmax(disc)), disc.shape)
        raise IllPosedProblemError(f"diffusion is not positive definite at node {tuple(int(w) for w in worst)} on {grid.label()}")


def assemble_steady(coeffs: CoefficientField, bc: BoundarySpec, grid: Grid2D) -> BlockSystem:
    _require_positive_definite(coeffs, grid)
    _check_dirichlet(bc)
    t = coeffs.time
    return BlockSystem(
        grid=grid,
        weights=stencil_weights(coeffs, grid),
        rhs=coeffs.interior("s").copy(),
        boundary=boundary_values(bc, grid, t),
        closure=boundary_closure(bc, grid, t),
        coefficients=coeffs,
    )


def theta_system(
    state_n: SolutionState,
    coeffs_n: CoefficientField,
    coeffs_np1: CoefficientField,
    bc: BoundarySpec,
    cfg: TimeIntegratorConfig,
) -> BlockSystem:
    """[1 + iota dt A] phi^{n+1} = [1 - (1 - iota) dt A] phi^n + dt (iota s^{n+1} + (1 - iota) s^n)."""
    grid = state_n.grid
    _check_dirichlet(bc)
    _require_positive_definite(coeffs_np1, grid)
    iota, dt = cfg.iota, cfg.dt
    if iota > 0.0:
        cfg.check_growth_bound(float(np.min(coeffs_np1.d)))

    rhs = state_n.phi[1:-1, 1:-1] + dt * (iota * coeffs_np1.interior("s") + (1.0 - iota) * coeffs_n.interior("s"))
    if iota < 1.0:
        rhs = rhs - (1.0 - iota) * dt * apply_discrete_operator_field(coeffs_n, state_n)

    weights = iota * dt * stencil_weights(coeffs_np1, grid)
    weights[0, 1, 1] += 1.0
    t = coeffs_np1.time
    return BlockSystem(
        grid=grid,
        weights=weights,
        rhs=rhs,
        boundary=boundary_values(bc, grid, t),
        closure=boundary_closure(bc, grid, t),
        coefficients=coeffs_np1,
        scale=iota * dt,
        shift=1.0,
        explicit=iota == 0.0,
    )


def step_theta(
    state_n: SolutionState,
    coeffs_n: CoefficientField,
    coeffs_np1: CoefficientField,
    bc: BoundarySpec,
    cfg: TimeIntegratorConfig,
    solver_cfg: Optional[SolverConfig] = None,
) -> SolutionState:
    system = theta_system(state_n, coeffs_n, coeffs_np1, bc, cfg)
    state, _ = solve_block(system, state_n, solver_cfg or SolverConfig())
    return state


def max_stable_dt(d_min: float, iota: float) -> float:
    """Sufficient step bound -1/(iota d_min) for d < 0; infinite otherwise."""
    if d_min >= 0.0 or iota == 0.0:
        return math.inf
    return -1.0 / (iota * d_min)


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def sample_coefficients(
    functions: CoefficientFunctions, grid: Grid2D, t: float, mapping: Optional[Mapping] = None, metrics=None
) -> CoefficientField:
    """Nodal coefficients at time t, transformed to (xi, eta) when a non-trivial mapping is given."""
    if mapping is None or mapping.name == MappingKind.IDENTITY.value:
        return sample_physical(functions, grid, t)
    return transform_scalar_pde(mapping, grid, functions, t, metrics=metrics)


def initial_state(fn: Callable[[Array, Array], Array], grid: Grid2D, closure: BoundaryClosure) -> SolutionState:
    XI, ETA = grid.mesh
    phi = np.broadcast_to(np.asarray(fn(XI, ETA), dtype=float), grid.shape).copy()
    return state_with_gradients(phi, grid, closure)


def march(
    problem,
    grid: Grid2D,
    cfg: TimeIntegratorConfig,
    solver_cfg: Optional[SolverConfig] = None,
    record_at: Sequence[float] = (),
    progress: bool = True,
) -> Tuple[SolutionState, List[IterationReport], Dict[float, SolutionState]]:
    """March a TestProblem from t=0 to cfg.t_end; snapshots kept at the `record_at` times."""
    solver_cfg = solver_cfg or SolverConfig()
    steps = cfg.steps
    marks = {}
    for t in record_at:
        n = round(t / cfg.dt)
        if not math.isclose(n * cfg.dt, t, rel_tol=1e-9, abs_tol=1e-14) or n > steps:
            raise ConfigurationError(f"record time {t} is not a step of dt={cfg.dt} within t_end={cfg.t_end}")
        marks[n] = t

    mapping = problem.mapping
    metrics = problem.metrics(grid)
    functions = problem.coefficient_functions()
    bc = problem.boundary_spec()
    state = initial_state(lambda xi, eta: bc.g(xi, eta, 0.0), grid, boundary_closure(bc, grid, 0.0))
    coeffs = sample_coefficients(functions, grid, 0.0, mapping, metrics)

    reports: List[IterationReport] = []
    snapshots: Dict[float, SolutionState] = {marks[0]: state} if 0 in marks else {}
    logger.info(f"Marching {problem.name} on {grid.label()}: {steps} steps of dt={cfg.dt:.4g}, iota={cfg.iota}")
    for n in tqdm(range(1, steps + 1), desc=f"{problem.name} {grid.label()}", disable=not progress, leave=False):
        coeffs_next = sample_coefficients(functions, grid, n * cfg.dt, mapping, metrics)
        system = theta_system(state, coeffs, coeffs_next, bc, cfg)
        state, report = solve_block(system, state, solver_cfg)
        reports.append(report)
        coeffs = coeffs_next
        if n in marks:
            snapshots[marks[n]] = state
    return state, reports, snapshots


def march_to_steady(
    coeffs: CoefficientField,
    bc: BoundarySpec,
    grid: Grid2D,
    dt: float,
    solver_cfg: Optional[SolverConfig] = None,
    tolerance: float = 1e-9,
    max_steps: int = 10_000,
    iota: float = 0.5,
    initial: Optional[SolutionState] = None,
) -> Tuple[SolutionState, int]:
    """Pseudo-time marching of a time-independent problem until successive levels agree."""
    solver_cfg = solver_cfg or SolverConfig()
    cfg = TimeIntegratorConfig(iota=iota, dt=dt, t_end=dt)
    state = initial or state_with_gradients(boundary_values(bc, grid, coeffs.time), grid, boundary_closure(bc, grid, coeffs.time))
    for step in range(1, max_steps + 1):
        new, _ = solve_block(theta_system(state, coeffs, coeffs, bc, cfg), state, solver_cfg)
        change = float(np.max(np.abs(new.phi - state.phi)))
        state = new
        if change <= tolerance * max(1.0, float(np.max(np.abs(state.phi)))):
            logger.info(f"Pseudo-time marching settled after {step} steps on {grid.label()}")
            return state, step
    raise NonConvergenceError(f"pseudo-time marching did not settle in {max_steps} steps (last change {change:.3e})", [change])


# ---------------------------------------------------------------------------
# doubly periodic stepping
# ---------------------------------------------------------------------------


def step_theta_periodic(phi: Array, coeffs, h: float, k: float, dt: float, iota: float, tolerance: float = 1e-12) -> Array:
    """One source-free theta step on a doubly periodic grid with constant coefficients."""
    shape = phi.shape
    n = phi.size

    def operator(values: Array) -> Array:
        return apply_periodic_operator(coeffs, np.reshape(values, shape), h, k).ravel()

    rhs = phi.ravel() - (1.0 - iota) * dt * operator(phi.ravel())
    if iota == 0.0:
        return np.reshape(rhs, shape)
    implicit = LinearOperator((n, n), matvec=lambda v: v + iota * dt * operator(v), dtype=float)
    x, info = gmres(implicit, rhs, rtol=tolerance, atol=0.0, restart=n, maxiter=n)
    if info != 0 and np.linalg.norm(implicit.matvec(x) - rhs) > 1e-10 * np.linalg.norm(rhs):
        raise NonConvergenceError(f"periodic theta step: GMRES returned info={info}")
    return np.reshape(x, shape)
