import pytest

from adaptive_em.coeffs import CoefficientModel

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def poly(nu=2.0, sigma=2.0):
    return CoefficientModel.polynomial(nu, sigma)
