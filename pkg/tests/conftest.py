import pytest

from tndsim.diagnostic import DiagnosticTest
from tndsim.simulate import Scenario

_ACCEPTANCE = []


def record_acceptance(line):
    _ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def paper_scenario():
    """10,000 per arm, prevalence 1% vaccinated / 10% unvaccinated, perfect test."""
    return Scenario(10000, 10000, 0.01, 0.10, DiagnosticTest(1.0, 1.0))
