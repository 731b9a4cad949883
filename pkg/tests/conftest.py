import numpy as np
import pytest

from oais import (
    ParameterBox,
    clamp_test_function,
    gaussian_mean_family,
    make_gaussian_target,
    make_mixture_target,
)


@pytest.fixture
def std_prop():
    return gaussian_mean_family(1.0, 1)


@pytest.fixture
def std_target():
    return make_gaussian_target([0.0], 1.0)


@pytest.fixture
def unnorm_target():
    # synthetic Z = 10
    return make_gaussian_target([0.0], 1.0, normalized=False)


@pytest.fixture
def bimodal():
    return make_mixture_target([(0.5, [-2.0], 1.0), (0.5, [2.0], 1.0)])


@pytest.fixture
def box1():
    return ParameterBox([-1.5], [1.5])


@pytest.fixture
def phi():
    return clamp_test_function(-10.0, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Record a one-line verdict that is echoed in the terminal summary."""
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
