import sys

import pytest
from hypothesis import HealthCheck, settings

from levyruin.config import load_preset

settings.register_profile("levyruin", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("levyruin")


@pytest.fixture(scope="session")
def ex1():
    return load_preset("example1_powertail").model


@pytest.fixture(scope="session")
def ex2():
    return load_preset("example2_jumps").model


@pytest.fixture(scope="session")
def lattice():
    return load_preset("arithmetic_lattice").model


@pytest.fixture(scope="session")
def certain():
    return load_preset("example1_certain_ruin").model


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
