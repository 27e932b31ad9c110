import numpy as np
import pytest

from aggrekit.domain import BoundaryLayout, build_grid
from aggrekit.evolution import Problem, initial_density
from aggrekit.kernels import KernelSpec, build_operator
from aggrekit.laws import DiffusionLaw


def make_problem(n=64, family="gaussian", amplitude=0.5, width=0.2, m=3.0, epsilon=0.1,
                 d=1, extent=1.0, layout=None):
    grid = build_grid(d, [extent] * d, [n] * d, layout or BoundaryLayout.all_neumann())
    op = build_operator(KernelSpec(family, amplitude, width, d), grid)
    return Problem(grid, op, DiffusionLaw(1.0, m, epsilon))


@pytest.fixture
def reference_problem():
    """1D reference configuration at nx=128."""
    return make_problem(n=128)


@pytest.fixture
def reference_u0(reference_problem):
    return initial_density(reference_problem.grid, "gaussian_bump", 1.0, sigma=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("ab:"))):
            terminalreporter.write_line(line)
