import logging

import numpy as np
import pytest

from hocpde import solver
from hocpde.assembly import assemble_steady, boundary_closure, sample_coefficients, step_theta, theta_system
from hocpde.exceptions import ConfigurationError, NonConvergenceError
from hocpde.models import BoundarySpec, CoefficientField, InnerSolver
from hocpde.operators import state_with_gradients
from hocpde.problems import error_norms, problem1, problem2
from hocpde.schemas import SolverConfig, TimeIntegratorConfig
from hocpde.solver import ORACLE_MAX_UNKNOWNS, dense_oracle_solve, preconditioner_matrix, relative_residual, solve_block


def _steady_system(problem, grid):
    coeffs = sample_coefficients(problem.coefficient_functions(), grid, 0.0, problem.mapping, problem.metrics(grid))
    return assemble_steady(coeffs, problem.boundary_spec(), grid)


def _poisson_system(grid):
    X, Y = grid.mesh
    ones, zeros = np.ones(grid.shape), np.zeros(grid.shape)
    exact = np.sin(np.pi * X) * np.sinh(np.pi * Y) / np.sinh(np.pi)
    bc = BoundarySpec(g=lambda xi, eta, t: np.sin(np.pi * xi) * np.sinh(np.pi * eta) / np.sinh(np.pi))
    coeffs = CoefficientField(ones, ones, zeros, zeros, zeros, zeros, zeros)
    return assemble_steady(coeffs, bc, grid), exact


def test_krylov_solve_matches_the_oracle(unit_grid, steady_problem1, solver_cfg):
    system = _steady_system(steady_problem1, unit_grid(8))
    state, report = solve_block(system, None, solver_cfg)
    assert report.converged
    assert report.residual <= solver_cfg.tolerance
    assert report.residual_history[0] == pytest.approx(1.0)
    oracle = dense_oracle_solve(system)
    np.testing.assert_allclose(state.phi, oracle.phi, atol=1e-9)
    np.testing.assert_allclose(state.phi_x, oracle.phi_x, atol=1e-8)
    np.testing.assert_allclose(state.phi_y, oracle.phi_y, atol=1e-8)


def test_line_relaxation_on_a_diffusion_problem(unit_grid):
    system, _ = _poisson_system(unit_grid(10))
    cfg = SolverConfig(tolerance=1e-10, max_outer=200, inner=InnerSolver.LINE_RELAX, inner_max_iterations=50)
    state, report = solve_block(system, None, cfg)
    assert report.iterations > 1
    np.testing.assert_allclose(state.phi, dense_oracle_solve(system).phi, atol=1e-8)


def test_relaxed_updates_still_converge(unit_grid):
    system, _ = _poisson_system(unit_grid(8))
    state, report = solve_block(system, None, SolverConfig(tolerance=1e-10, max_outer=400, relaxation=0.6))
    assert relative_residual(system, state) <= 1e-10


def test_poisson_converges_at_fourth_order(unit_grid, solver_cfg):
    errors = []
    for M in (8, 16):
        grid = unit_grid(M)
        system, exact = _poisson_system(grid)
        state, _ = solve_block(system, None, solver_cfg)
        errors.append(error_norms(state.phi, exact, grid).linf)
    assert np.log2(errors[0] / errors[1]) > 3.5


def test_initial_guess_at_the_solution(unit_grid, solver_cfg):
    system, _ = _poisson_system(unit_grid(8))
    state, _ = solve_block(system, None, solver_cfg)
    again, report = solve_block(system, state, solver_cfg)
    assert report.iterations == 1
    np.testing.assert_array_equal(again.phi, state.phi)


def test_non_convergence_reports_the_history(unit_grid, steady_problem1):
    system = _steady_system(steady_problem1, unit_grid(8))
    with pytest.raises(NonConvergenceError) as info:
        solve_block(system, None, SolverConfig(tolerance=1e-14, max_outer=1))
    assert info.value.residual_history == [pytest.approx(1.0)]
    assert info.value.last_residual == pytest.approx(1.0)


def test_preconditioner_is_a_nine_point_matrix(unit_grid, steady_problem1):
    grid = unit_grid(6)
    matrix = preconditioner_matrix(_steady_system(steady_problem1, grid))
    assert matrix.shape == (25, 25)
    assert max(np.diff(matrix.indptr)) <= 9


def test_oracle_size_cap(unit_grid):
    system, _ = _poisson_system(unit_grid(100))
    assert (99 * 99 + 2 * 101 * 101) > ORACLE_MAX_UNKNOWNS
    with pytest.raises(ConfigurationError, match="oracle"):
        dense_oracle_solve(system)


@pytest.mark.parametrize("epsilon", [0.1, 0.01])
def test_boundary_layer_solve_matches_the_oracle(unit_grid, solver_cfg, epsilon):
    system = _steady_system(problem2(epsilon), unit_grid(16))
    state, _ = solve_block(system, None, solver_cfg)
    oracle = dense_oracle_solve(system)
    assert relative_residual(system, oracle) <= 10.0 * solver_cfg.tolerance
    scale = float(np.max(np.abs(oracle.phi)))
    np.testing.assert_allclose(state.phi, oracle.phi, atol=1e-7 * scale)


def test_crank_nicolson_step_matches_the_oracle(unit_grid, solver_cfg):
    problem = problem1()
    grid = unit_grid(16)
    bc = problem.boundary_spec()
    dt = grid.h**2
    functions = problem.coefficient_functions()
    state_n = state_with_gradients(problem.exact_on_grid(grid, 0.0), grid, boundary_closure(bc, grid, 0.0))
    system = theta_system(
        state_n,
        sample_coefficients(functions, grid, 0.0),
        sample_coefficients(functions, grid, dt),
        bc,
        TimeIntegratorConfig(iota=0.5, dt=dt, t_end=dt),
    )
    state, _ = solve_block(system, state_n, solver_cfg)
    np.testing.assert_allclose(state.phi, dense_oracle_solve(system).phi, atol=1e-9)


def test_boundary_layer_residual_decreases_monotonically(unit_grid, caplog):
    system = _steady_system(problem2(0.01), unit_grid(16))
    with caplog.at_level(logging.WARNING, logger="hocpde.solver"):
        _, report = solve_block(system, None, SolverConfig(tolerance=1e-11, max_outer=60))
    history = report.residual_history
    assert len(history) > 2
    assert all(later < earlier for earlier, later in zip(history, history[1:]))
    assert not [r for r in caplog.records if "grew" in r.getMessage()]


def test_growing_residual_is_logged(unit_grid, monkeypatch, caplog):
    real = solver._krylov_inner

    def reversed_correction(system, rhs, factor, cfg):
        e, used = real(system, rhs, factor, cfg)
        return -e, used

    monkeypatch.setattr(solver, "_krylov_inner", reversed_correction)
    system, _ = _poisson_system(unit_grid(8))
    with caplog.at_level(logging.WARNING, logger="hocpde.solver"):
        with pytest.raises(NonConvergenceError) as info:
            solve_block(system, None, SolverConfig(tolerance=1e-10, max_outer=3))
    history = info.value.residual_history
    assert history[1] > history[0]
    assert any("grew" in r.getMessage() for r in caplog.records)


def test_pure_diffusion_stays_within_the_data_range(unit_grid, solver_cfg):
    grid = unit_grid(16)
    X, Y = grid.mesh
    ones, zeros = np.ones(grid.shape), np.zeros(grid.shape)
    coeffs = CoefficientField(ones, 0.5 * ones, zeros, zeros, zeros, zeros, zeros)
    bc = BoundarySpec(g=lambda xi, eta, t: 0.25 + 0.5 * eta)
    phi0 = 0.25 + 0.5 * Y + 0.25 * np.sin(np.pi * X) * np.sin(np.pi * Y)
    state = state_with_gradients(phi0, grid, boundary_closure(bc, grid, 0.0))
    cfg = TimeIntegratorConfig(iota=0.5, dt=grid.h, t_end=grid.h)
    tol = 1e-8
    for _ in range(8):
        state = step_theta(state, coeffs, coeffs, bc, cfg, solver_cfg)
        assert state.phi.min() >= -tol
        assert state.phi.max() <= 1.0 + tol
