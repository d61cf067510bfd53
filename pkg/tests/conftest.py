import numpy as np
import pytest
from hypothesis import settings

from proxista.experiments import build_problem, default_spec

settings.register_profile("proxista", deadline=None, max_examples=60)
settings.load_profile("proxista")


def philox(seed=0):
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def rng():
    return philox(12345)


@pytest.fixture(scope="session")
def exp1_problem():
    return build_problem(default_spec("sparse-deconv"))


@pytest.fixture(scope="session")
def exp2_problem():
    return build_problem(default_spec("integer-blocks"))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
