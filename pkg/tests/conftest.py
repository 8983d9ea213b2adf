import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from locgn.families import CycleCovered, Signpost, Tadpole, TerminalPendant
from locgn.graph import MetricGraph

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def tadpole():
    return Tadpole(2.0, 0.0).build()


@pytest.fixture(scope="session")
def signpost():
    return Signpost(1.0, 2.0).build()


@pytest.fixture(scope="session")
def cycle_covered():
    return CycleCovered(2, (4.0, 4.0)).build()


@pytest.fixture(scope="session")
def pendant():
    return TerminalPendant(5.0).build()


def line_graph(core_len: float = 1.0) -> MetricGraph:
    """The real line: two half-lines joined by one short edge."""
    return MetricGraph.build(["a", "b"], [("e", "a", "b", core_len)], [("h1", "a"), ("h2", "b")])


def sech_mass_oracle() -> float:
    """Mass of sech^(1/2)(2x/sqrt 3) squared over the line by adaptive quadrature."""
    from scipy.integrate import quad
    val, _ = quad(lambda x: 1.0 / math.cosh(min(2 * x / math.sqrt(3.0), 700.0)), 0.0, np.inf,
                  epsabs=1e-13, epsrel=1e-13)
    return 2.0 * val


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
