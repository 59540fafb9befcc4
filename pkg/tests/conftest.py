import numpy as np
import pytest

from sea_dynamics import GeneratorSet, LEVELS, run_scenario


@pytest.fixture(scope="session")
def fig1():
    return run_scenario("fig1")


@pytest.fixture(scope="session")
def fig3():
    return run_scenario("fig3")


@pytest.fixture(scope="session")
def gens4():
    return GeneratorSet.from_levels(LEVELS)


SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
PLUS = 0.5 * np.ones((2, 2), dtype=complex)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
