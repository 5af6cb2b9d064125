import numpy as np
import pytest

from daenum.design import DesignMatrix
from daenum.enumerator import enumerate_catalog

# (N, k_max) pairs cheap enough to enumerate once per session
SMALL = {5: 4, 6: 5, 9: 7, 10: 9, 13: 12, 14: 13}


@pytest.fixture(scope="session")
def small_catalogs():
    return {n: enumerate_catalog(n, k, workers=1) for n, k in SMALL.items()}


@pytest.fixture(scope="session")
def catalog17_low():
    return enumerate_catalog(17, 6, workers=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_design(rng, runs, factors):
    lv = rng.choice(np.array([-1, 1], dtype=np.int8), size=(runs, factors))
    return DesignMatrix.from_levels(lv)


def bucket(cat, k, label=None):
    """Designs of one (k, form) bucket; the only bucket when label is None."""
    hits = [v for (kk, f), v in cat.items() if kk == k and (label is None or f.label == label)]
    assert len(hits) == 1
    return hits[0]


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
