import numpy as np
import pytest

from levy_attractors.function_space import BasisSpec, build_triple


def make_triple(boundary="dirichlet", n=16, length=1.0, v_order=1, **kw):
    return build_triple(BasisSpec(dimension=1, length=length, boundary=boundary, mode_count=n,
                                  v_order=v_order, **kw))


def torus(mode_count=4, length=2 * np.pi):
    return build_triple(BasisSpec(dimension=2, length=length, boundary="periodic",
                                  mode_count=mode_count, v_order=1, divergence_free=True))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
