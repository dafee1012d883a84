import numpy as np
import pytest

from hocpde.exceptions import CouplingError
from hocpde.grid import compute_metrics, identity_mapping, log_polar_mapping, physical_nodes
from hocpde.models import FlowState
from hocpde.navier_stokes import couple_step, initial_flow, kinetic_energy, simulate, streamfunction_solve, velocity_recover
from hocpde.problems import vortex_decay
from hocpde.schemas import NSConfig


@pytest.fixture
def vortex():
    return vortex_decay(re=100.0)


def test_velocity_from_the_exact_stream_function(unit_grid, vortex):
    grid = unit_grid(32)
    flow = initial_flow(vortex, identity_mapping(), grid)
    X, Y = grid.mesh
    u, v = vortex.velocity(X, Y, 0.0)
    np.testing.assert_allclose(flow.u, u, atol=2e-4)
    np.testing.assert_allclose(flow.v, v, atol=2e-4)


def test_stream_function_from_the_exact_vorticity(unit_grid, vortex, solver_cfg):
    grid = unit_grid(16)
    mapping = identity_mapping()
    flow = initial_flow(vortex, mapping, grid)
    bc_psi, _ = vortex.boundary_specs(mapping)
    psi, report = streamfunction_solve(flow.omega, mapping, grid, bc_psi, 0.0, solver_cfg)
    assert report.residual <= solver_cfg.tolerance
    X, Y = grid.mesh
    np.testing.assert_allclose(psi.phi, vortex.psi(X, Y, 0.0), atol=1e-4)


def test_stream_function_on_a_log_polar_grid(unit_grid, vortex, solver_cfg):
    mapping = log_polar_mapping(0.05)
    grid = unit_grid(24)
    flow = initial_flow(vortex, mapping, grid)
    bc_psi, _ = vortex.boundary_specs(mapping)
    psi, _ = streamfunction_solve(flow.omega, mapping, grid, bc_psi, 0.0, solver_cfg)
    X, Y = physical_nodes(mapping, grid)
    exact = vortex.psi(X, Y, 0.0)
    assert np.max(np.abs(psi.phi - exact)) < 1e-2 * np.max(np.abs(exact))
    u, v = velocity_recover(psi, mapping, grid)
    u_exact, v_exact = vortex.velocity(X, Y, 0.0)
    assert np.max(np.abs(u - u_exact)) < 0.05 * np.max(np.abs(u_exact))
    assert np.max(np.abs(v - v_exact)) < 0.05 * np.max(np.abs(v_exact))


def test_kinetic_energy_of_the_vortex(unit_grid, vortex):
    grid = unit_grid(32)
    mapping = identity_mapping()
    flow = initial_flow(vortex, mapping, grid)
    assert kinetic_energy(flow, compute_metrics(mapping, grid), grid) == pytest.approx(np.pi**2 / 4.0, rel=1e-3)


def test_coupled_step_tracks_the_decay(unit_grid, vortex, solver_cfg):
    grid = unit_grid(16)
    mapping = identity_mapping()
    cfg = NSConfig(re=100.0, dt=0.01, t_end=0.01)
    flow = initial_flow(vortex, mapping, grid)
    new, iterations = couple_step(flow, mapping, grid, vortex.boundary_specs(mapping), cfg, solver_cfg)
    assert isinstance(new, FlowState)
    assert 2 <= iterations <= cfg.max_coupling_iterations
    assert new.time == pytest.approx(0.01)
    X, Y = grid.mesh
    assert np.max(np.abs(new.omega.phi - vortex.omega(X, Y, 0.01))) < 5e-3


def test_coupling_limit(unit_grid, vortex):
    grid = unit_grid(8)
    mapping = identity_mapping()
    flow = initial_flow(vortex, mapping, grid)
    cfg = NSConfig(dt=0.01, t_end=0.01, max_coupling_iterations=1)
    with pytest.raises(CouplingError, match="did not settle"):
        couple_step(flow, mapping, grid, vortex.boundary_specs(mapping), cfg)


def test_simulation_diagnostics(unit_grid, vortex, solver_cfg):
    grid = unit_grid(16)
    cfg = NSConfig(re=100.0, dt=0.01, t_end=0.03)
    flow, rows = simulate(vortex, identity_mapping(), grid, cfg, solver_cfg, progress=False)
    assert [r["time"] for r in rows] == pytest.approx([0.0, 0.01, 0.02, 0.03])
    energies = [r["kinetic_energy"] for r in rows]
    assert all(a > b for a, b in zip(energies, energies[1:]))
    assert rows[0]["coupling_iterations"] == 0
    assert max(r["omega_error"] for r in rows) < 5e-3
    assert flow.time == pytest.approx(0.03)


def test_stokes_limit_ignores_convection(unit_grid, vortex, solver_cfg):
    # the vortex array is also a Stokes solution: convection of vorticity vanishes identically
    grid = unit_grid(12)
    mapping = identity_mapping()
    with_convection, _ = simulate(vortex, mapping, grid, NSConfig(dt=0.01, t_end=0.02), solver_cfg, progress=False)
    without, rows = simulate(vortex, mapping, grid, NSConfig(dt=0.01, t_end=0.02, convection=False), solver_cfg, progress=False)
    np.testing.assert_allclose(with_convection.omega.phi, without.omega.phi, atol=1e-3)
    assert all(r["coupling_iterations"] <= 2 for r in rows[1:])
