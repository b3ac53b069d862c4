import numpy as np
import pytest
from hypothesis import settings

from advflow import analytic_density, build_grid, from_arrays

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid8():
    return build_grid(((0, 1), (0, 1)), 1 / 8)


@pytest.fixture
def unit_density(grid8):
    return analytic_density("constant", (0.5, 0.5), grid8)


def random_density(grid, rng, lo=0.2, hi=1.0):
    return from_arrays(grid, rng.uniform(lo, hi, grid.shape), rng.uniform(lo, hi, grid.shape))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
