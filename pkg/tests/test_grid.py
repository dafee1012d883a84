import numpy as np
import pytest

from hocpde.assembly import apply_discrete_operator_field
from hocpde.exceptions import IllPosedProblemError, InvalidGridError, NonMonotoneMappingError, SingularMappingError
from hocpde.grid import (
    build_uniform_grid,
    compute_metrics,
    finite_difference_mapping,
    identity_mapping,
    log_polar_mapping,
    mapping_by_name,
    physical_nodes,
    problem2_mapping,
    pull_back,
    sample_physical,
    transform_scalar_pde,
)
from hocpde.models import CoefficientFunctions, MappingKind, MetricProvenance, SolutionState
from hocpde.problems import problem1, problem2


def test_uniform_grid_geometry():
    grid = build_uniform_grid((0.0, 2.0, -1.0, 1.0), 4, 8)
    assert grid.h == pytest.approx(0.5)
    assert grid.k == pytest.approx(0.25)
    assert grid.shape == (5, 9)
    assert grid.interior_shape == (3, 7)
    assert grid.node(2, 4) == (1.0, 0.0)
    assert grid.label() == "5x9"
    assert grid.boundary_mask().sum() == 5 * 9 - 3 * 7


@pytest.mark.parametrize("bounds, M, N", [((0, 1, 0, 1), 1, 4), ((0, 1, 0, 1), 4, 0), ((1, 1, 0, 1), 4, 4)])
def test_invalid_grids(bounds, M, N):
    with pytest.raises(InvalidGridError):
        build_uniform_grid(bounds, M, N)


def test_grid_coordinates_are_read_only(unit_grid):
    with pytest.raises(ValueError):
        unit_grid().x[0] = 5.0


@pytest.mark.parametrize("lam", [1.0, 1.5, -0.1])
def test_stretch_parameter_out_of_range(lam):
    with pytest.raises(NonMonotoneMappingError):
        problem2_mapping(lam)


def test_mapping_by_name():
    assert mapping_by_name("identity").name == MappingKind.IDENTITY.value
    assert mapping_by_name(MappingKind.LOG_POLAR, scale=1.0).conformal
    with pytest.raises(Exception, match="unknown mapping"):
        mapping_by_name("spiral")


def test_identity_metrics(unit_grid):
    m = compute_metrics(identity_mapping(), unit_grid(6))
    np.testing.assert_allclose(m.jacobian, 1.0)
    np.testing.assert_allclose(m.xi_x, 1.0)
    np.testing.assert_allclose(m.xi_y, 0.0)
    for name in ("xi_xx", "xi_xy", "xi_yy", "eta_xx", "eta_xy", "eta_yy"):
        np.testing.assert_allclose(getattr(m, name), 0.0)


def test_stretched_mapping_keeps_the_domain_walls(unit_grid):
    grid = unit_grid(16)
    X, Y = physical_nodes(problem2_mapping(0.9), grid)
    np.testing.assert_allclose(X, grid.mesh[0])
    np.testing.assert_allclose(Y[:, 0], 0.0)
    np.testing.assert_allclose(Y[:, -1], 1.0 / (1.0 - 0.3 * np.sin(6.0 * grid.x)))
    assert np.all(np.diff(Y, axis=1) > 0.0)


def test_stretched_mapping_concentrates_nodes_at_the_top_wall(unit_grid):
    _, Y = physical_nodes(problem2_mapping(0.9), unit_grid(16))
    spacing = np.diff(Y[0])
    assert spacing[-1] < 0.2 * spacing[0]


def test_analytic_and_nodal_metrics_agree(unit_grid):
    grid = unit_grid(128)
    analytic = compute_metrics(problem2_mapping(0.5), grid)
    nodal_mapping = finite_difference_mapping(problem2_mapping(0.5).forward)
    assert nodal_mapping.provenance is MetricProvenance.FINITE_DIFFERENCE
    nodal = compute_metrics(nodal_mapping, grid)
    for name in ("x_xi", "y_xi", "y_eta", "jacobian", "eta_x", "eta_y"):
        np.testing.assert_allclose(getattr(nodal, name), getattr(analytic, name), rtol=1e-4, atol=1e-4)


def test_log_polar_coordinates_are_harmonic(unit_grid):
    m = compute_metrics(log_polar_mapping(0.5), unit_grid(12))
    np.testing.assert_allclose(m.laplacian_xi, 0.0, atol=1e-10)
    np.testing.assert_allclose(m.laplacian_eta, 0.0, atol=1e-10)
    # conformal: xi and eta gradients are orthogonal with equal length
    np.testing.assert_allclose(m.xi_x * m.eta_x + m.xi_y * m.eta_y, 0.0, atol=1e-12)
    np.testing.assert_allclose(m.xi_x**2 + m.xi_y**2, m.eta_x**2 + m.eta_y**2, rtol=1e-12)


def test_inverse_second_derivatives_of_log_polar(unit_grid):
    # xi = ln(r / scale) / pi, so xi_xx = (y^2 - x^2) / (pi r^4)
    mapping = log_polar_mapping(0.5)
    grid = unit_grid(8)
    X, Y = physical_nodes(mapping, grid)
    m = compute_metrics(mapping, grid)
    r2 = X**2 + Y**2
    np.testing.assert_allclose(m.xi_xx, (Y**2 - X**2) / (np.pi * r2**2), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(m.xi_xy, -2.0 * X * Y / (np.pi * r2**2), rtol=1e-10, atol=1e-12)


def test_degenerate_mapping(unit_grid):
    # y_eta vanishes on the middle row
    collapsed = finite_difference_mapping(lambda xi, eta: (xi.copy(), (eta - 0.5) ** 3), name="collapsed")
    with pytest.raises(SingularMappingError, match="collapsed"):
        compute_metrics(collapsed, unit_grid(8))


def test_identity_transform_reproduces_physical_coefficients(unit_grid):
    grid = unit_grid(8)
    functions = problem1().coefficient_functions()
    physical = sample_physical(functions, grid, 0.1)
    transformed = transform_scalar_pde(identity_mapping(), grid, functions, 0.1)
    for name in ("alpha1", "alpha2", "beta", "c1", "c2", "d", "s"):
        np.testing.assert_allclose(getattr(transformed, name), getattr(physical, name), atol=1e-14)


def test_stretched_transform_reproduces_the_forcing(unit_grid):
    problem = problem2(0.5)
    errors = []
    for M in (32, 64):
        grid = unit_grid(M)
        m = compute_metrics(problem.mapping, grid)
        X, Y = physical_nodes(problem.mapping, grid)
        jet = problem.jet(X, Y, 0.0)
        state = SolutionState(grid, jet.u, jet.u_x * m.x_xi + jet.u_y * m.y_xi, jet.u_x * m.x_eta + jet.u_y * m.y_eta)
        coeffs = transform_scalar_pde(problem.mapping, grid, problem.coefficient_functions(), 0.0)
        errors.append(np.max(np.abs(apply_discrete_operator_field(coeffs, state) - coeffs.interior("s"))))
    assert errors[1] < 1e-3 * np.max(np.abs(coeffs.s))
    assert np.log2(errors[0] / errors[1]) > 3.5


def test_transformed_problem_stays_elliptic(unit_grid):
    functions = problem1().coefficient_functions()
    field = transform_scalar_pde(problem2_mapping(0.9), unit_grid(16), functions)
    assert field.positive_definite()


def test_ill_posed_transform(unit_grid):
    one = lambda x, y, t: np.ones_like(x)  # noqa: E731
    zero = lambda x, y, t: np.zeros_like(x)  # noqa: E731
    functions = CoefficientFunctions(one, one, lambda x, y, t: 3.0 * np.ones_like(x), zero, zero, zero, zero)
    with pytest.raises(IllPosedProblemError):
        transform_scalar_pde(problem2_mapping(0.5), unit_grid(8), functions)


def test_pull_back_chain_rule(unit_grid):
    mapping = problem2_mapping(0.7)

    def f(x, y, t):
        return np.sin(x) * y**2 + t

    def grad(x, y, t):
        return np.cos(x) * y**2, 2.0 * np.sin(x) * y

    g, gradient = pull_back(mapping, f, grad)
    xi, eta, step = 0.3, 0.6, 1e-6
    g_xi, g_eta = gradient(np.array(xi), np.array(eta), 0.0)
    assert g_xi == pytest.approx((g(xi + step, eta, 0.0) - g(xi - step, eta, 0.0)) / (2 * step), rel=1e-7)
    assert g_eta == pytest.approx((g(xi, eta + step, 0.0) - g(xi, eta - step, 0.0)) / (2 * step), rel=1e-7)


def test_pull_back_without_gradient():
    g, gradient = pull_back(identity_mapping(), lambda x, y, t: x * y)
    assert gradient is None
    assert g(np.array(2.0), np.array(3.0), 0.0) == 6.0
