import numpy as np
import pytest
from hypothesis import settings

from growthcast.model import ModelSpec, Priors
from growthcast.samplers import RandomStream
from growthcast.synthetic import draw_prior, geweke_instance, simulate_counts

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return RandomStream(12345)


@pytest.fixture
def tiny():
    """N=3, T=10, p=2 instance with a state drawn from proper priors and matching data."""
    gen = np.random.default_rng(3)
    data = geweke_instance(0)
    state = draw_prior(gen, data.X, Priors.geweke())
    data = data.with_y(simulate_counts(state, data.t, gen))
    return data, state


@pytest.fixture
def m3():
    return ModelSpec("M3")


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store and print one PASS/FAIL line for an acceptance criterion."""
    def rec(n, ok, detail):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE[n] = line
        print(line)
    return rec


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
