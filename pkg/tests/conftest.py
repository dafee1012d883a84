import numpy as np
import pytest

from hocpde.grid import build_uniform_grid, identity_mapping
from hocpde.problems import TestProblem, problem1
from hocpde.schemas import SolverConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def unit_grid():
    def make(M=8, N=None):
        return build_uniform_grid((0.0, 1.0, 0.0, 1.0), M, N or M)

    return make


@pytest.fixture
def steady_problem1():
    """Problem 1 coefficients with the t=0 profile as a time-independent solution."""
    p = problem1()
    return TestProblem("problem1-steady", p.coefficients, p.jet, identity_mapping(), steady=True)


@pytest.fixture
def solver_cfg():
    return SolverConfig(tolerance=1e-11, max_outer=60)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
