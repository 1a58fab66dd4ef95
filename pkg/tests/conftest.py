import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rmhopf.model import ModelParams

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def worked() -> ModelParams:
    return ModelParams(m=2.0, c=1.0, k=2.0, omega=1.0, e=1.0)


def random_feasible(rng: np.random.Generator, e: float = 1.0, omega: float = 1.0) -> ModelParams:
    """Draw (m, c, k) with m > c and K3 strictly inside the quadrant."""
    m = rng.uniform(0.2, 10.0)
    c = rng.uniform(0.05, 0.95) * m
    k_min = c / (m - c)
    k = k_min * rng.uniform(1.01, 20.0)
    return ModelParams(m=m, c=c, k=k, omega=omega, e=e)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
