import numpy as np
import pytest

from tfising.model import make_model
from tfising.sampler import McEngine


@pytest.fixture
def ring():
    """4-site ring at beta = 0.4, q = 0.3."""
    return make_model(1, 2, beta=0.4, q=0.3)


@pytest.fixture
def engine():
    return McEngine(seed=11, replicas=16, samples=2000)


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
