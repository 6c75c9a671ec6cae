import numpy as np
import pytest

from hankel_lti.lti import DiagonalContinuousSystem, DiagonalDiscreteSystem


def random_continuous(rng, n, re=(0.1, 2.0), im=5.0):
    a = -rng.uniform(*re, n) + 1j * rng.uniform(-im, im, n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    d = complex(rng.standard_normal(), rng.standard_normal())
    return DiagonalContinuousSystem(a, b, c, d)


def random_discrete(rng, n, radius=0.95):
    a = radius * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n))
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return DiagonalDiscreteSystem(a, b, c, complex(rng.standard_normal()))


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
