import warnings

import numpy as np
import pytest

from memodiff import EpsilonSpec, ExponentialKernel, NonlinearitySpec, make_config
from memodiff.model import AutonomousModeWarning


@pytest.fixture(scope="session")
def default_config():
    return make_config()


@pytest.fixture(scope="session")
def small_config():
    """Few modes and a coarse s-grid: cheap enough for property tests."""
    return make_config(n_modes=6, n_quad=24, s_step=0.05)


def linear_config(eps0=1.0, s_step=1e-3, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AutonomousModeWarning)
        return make_config(eps=EpsilonSpec("constant", eps0), kernel=ExponentialKernel(amplitude=0.0),
                           nonlinearity=NonlinearitySpec("zero"), g=None, s_step=s_step, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# filled by test_acceptance, one (criterion, passed, detail) per criterion
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
