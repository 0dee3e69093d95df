import numpy as np
import pytest
from hypothesis import settings

from fairfolio.regret import Grouping, Population

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# acceptance criterion number -> PASS/FAIL line, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[num])


def random_population(rng, n, ties=True):
    """Sorted thresholds with non-decreasing returns in [0, 1]."""
    if ties and rng.random() < 0.3:
        taus = np.sort(rng.integers(1, n + 1, n).astype(float))
    else:
        taus = np.sort(rng.uniform(0.01, 1.0, n))
    uniq, inv = np.unique(taus, return_inverse=True)
    rets = np.sort(rng.uniform(0.0, 1.0, len(uniq)))[inv]
    return Population(taus, rets)


def random_grouping(rng, n, g):
    g = min(g, n)
    a = np.concatenate((np.arange(g), rng.integers(0, g, n - g)))
    rng.shuffle(a)
    return Grouping(a, g)


@pytest.fixture
def line4():
    return Population([1, 2, 3, 4], [1, 2, 3, 4])


@pytest.fixture
def two_singletons():
    return Population([1, 2], [1, 2]), Grouping([0, 1])
