"""Reference runs of the three test problems; enable with --runslow."""

import numpy as np
import pytest

from hocpde import services
from hocpde.config import parse_assignments
from hocpde.grid import build_uniform_grid, identity_mapping
from hocpde.navier_stokes import simulate
from hocpde.problems import convergence_order, vortex_decay
from hocpde.schemas import NSConfig, RunConfig, SolverConfig

pytestmark = pytest.mark.slow


def _config(tmp_path, *lines):
    return RunConfig.model_validate({**parse_assignments(lines), "out": tmp_path})


def test_spatial_order_with_dt_equal_h_squared(tmp_path):
    config = _config(tmp_path, "problem = problem1", "grids = 10, 20, 40", "time.t_end = 0.5", "time.checkpoints = 0.25, 0.5")
    frame, _ = services.run_convergence(config, progress=False, timestamp=False)
    finest = frame[frame["label"] == "41x41"]
    for column in ("l1_order", "l2_order", "linf_order"):
        assert np.all((finest[column] > 3.63) & (finest[column] < 4.22)), finest
    coarse = frame[(frame["label"] == "11x11") & (frame["t"] == 0.25)]
    assert float(coarse["l1"].iloc[0]) < 3.0 * 2.338e-6


def test_temporal_order_on_a_fixed_grid(tmp_path):
    config = _config(
        tmp_path, "problem = problem1", "grid.M = 30", "grid.N = 30", "time.dt_rule = fixed", "time.dts = 0.01, 0.005, 0.0025", "time.t_end = 0.25"
    )
    frame, _ = services.run_convergence(config, progress=False, timestamp=False)
    orders = frame["linf_order"].dropna()
    assert len(orders) == 2
    assert np.all((orders > 1.47) & (orders < 2.2)), frame


def test_boundary_layer_problem_on_the_fine_grid(tmp_path):
    config = _config(tmp_path, "problem = problem2", "epsilon = 0.01", "grid.M = 256", "grid.N = 256")
    frame, _ = services.run_field(config, timestamp=False)
    assert frame["error"].max() <= 1e-6


def test_boundary_layer_problem_interior_order(tmp_path):
    config = _config(tmp_path, "problem = problem2", "epsilon = 0.01", "grids = 64, 128")
    frame, _ = services.run_convergence(config, progress=False, timestamp=False)
    assert frame["linf_order"].iloc[1] >= 3.5


def test_vortex_decay_on_a_fine_grid(tmp_path):
    config = _config(tmp_path, "grid.M = 64", "grid.N = 64", "re = 100", "time.dt = 0.005", "time.t_end = 0.1")
    series, _, _ = services.run_ns_vortex(config, timestamp=False)
    energy = series["kinetic_energy"].to_numpy()
    expected = energy[0] * np.exp(-4.0 * np.pi**2 * series["time"].to_numpy() / 100.0)
    np.testing.assert_allclose(energy, expected, rtol=1e-4)
    assert series["omega_error"].max() < 1e-4


def _vortex_errors(re, M, dt, t_end):
    grid = build_uniform_grid((0.0, 1.0, 0.0, 1.0), M, M)
    cfg = NSConfig(re=re, dt=dt, t_end=t_end, coupling_tolerance=1e-10)
    _, rows = simulate(vortex_decay(re), identity_mapping(), grid, cfg, SolverConfig(tolerance=1e-12, max_outer=100), progress=False)
    assert max(r["coupling_iterations"] for r in rows[1:]) <= 10
    return rows[-1]["psi_error"], rows[-1]["omega_error"]


def test_vortex_decay_spatial_order():
    coarse = _vortex_errors(100.0, 32, 0.001, 0.1)
    fine = _vortex_errors(100.0, 64, 0.001, 0.1)
    for e_coarse, e_fine in zip(coarse, fine):
        assert 3.5 <= convergence_order(e_coarse, e_fine) <= 4.5, (coarse, fine)


def test_vortex_decay_temporal_order():
    errors = [_vortex_errors(1.0, 32, dt, 0.1) for dt in (0.02, 0.01, 0.005)]
    for previous, current in zip(errors, errors[1:]):
        for e_coarse, e_fine in zip(previous, current):
            assert 1.7 <= convergence_order(e_coarse, e_fine) <= 2.2, errors
