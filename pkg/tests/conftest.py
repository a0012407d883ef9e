import numpy as np
import pytest

from fsplanewave import FourierPotential, reference_solve, vt_potential


@pytest.fixture(scope="session")
def v1():
    return vt_potential(1.0)


@pytest.fixture(scope="session")
def v0_family():
    return vt_potential(0.0)


@pytest.fixture(scope="session")
def zero_potential():
    return FourierPotential(np.zeros(1), L=1.0)


@pytest.fixture(scope="session")
def ref_t1(v1):
    return reference_solve(v1, 1000, 6)


def random_hermitian(n, rng):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (A + A.conj().T) / 2


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
