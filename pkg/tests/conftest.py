import numpy as np
import pytest
from hypothesis import settings

from colk.kernel import GaussianKernel, KernelExpansion

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def gauss():
    return GaussianKernel(0.06)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_expansion(rng, M, p=1, bandwidth=0.5, scale=1.0):
    k = GaussianKernel(bandwidth)
    return KernelExpansion(k, rng.uniform(-1, 1, (M, p)), rng.normal(0, scale, M))


# acceptance verdict lines, printed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
