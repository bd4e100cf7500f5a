import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from utilcast.dataset import FeatureMatrix, synthetic_benchmark  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

# PASS/FAIL lines appended by the acceptance tests
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def benchmark():
    return synthetic_benchmark()


@pytest.fixture
def small_matrix():
    rng = np.random.default_rng(0)
    X = rng.random((120, 4))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 + 0.05 * rng.standard_normal(120)
    return FeatureMatrix(("a", "b", "c", "d"), X, "y", y)


@pytest.fixture
def fixtures():
    return FIXTURES
