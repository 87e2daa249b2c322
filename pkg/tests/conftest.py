from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from gfrag.kernel import ModelParams, MonomialKernel

settings.register_profile(
    "gfrag", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("gfrag")

SEED = 20240611


@pytest.fixture(scope="session")
def params():
    """Growth rate 2x below size 1, 0.5x above."""
    return ModelParams(a_minus=2.0, a_plus=0.5)


@pytest.fixture(scope="session")
def kernel():
    """Uniform fragment law."""
    return MonomialKernel(1.0)


@pytest.fixture(scope="session")
def seed():
    return SEED


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
