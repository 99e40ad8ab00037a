import numpy as np
import pytest

from maxreg.hilbert import GramPair


def random_spd(n, rng, shift=1.0):
    X = rng.standard_normal((n, n))
    return X @ X.T / n + shift * np.eye(n)


def random_pair(n, seed=0):
    rng = np.random.default_rng(seed)
    G_H = random_spd(n, rng)
    return GramPair(G_H, G_H + random_spd(n, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
