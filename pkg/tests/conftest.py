import numpy as np
import pytest

from nnjscc.model import make_noise, make_source
from nnjscc.nonexcess import PsiContext


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gaussian_source():
    return make_source("gaussian", {"sigma2": 1.0})


@pytest.fixture
def gaussian_noise():
    return make_noise("gaussian")


@pytest.fixture
def ctx_quarter():
    return PsiContext(1.0, 0.25)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.RESULTS:
        terminalreporter.write_line(line)
