import numpy as np
import pytest

from logeuler.field import ScalarField, random_log_field


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def zero_mean_random(N, seed):
    """White-noise field with the mean removed."""
    v = np.random.default_rng(seed).standard_normal((N, N))
    return ScalarField(v - v.mean())


@pytest.fixture
def rough128():
    return random_log_field(1.0, 0.1, seed=5, N=128, kmax=42)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
