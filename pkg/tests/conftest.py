import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from equivsig.bench import SyntheticSpec, generate_synthetic  # noqa: E402


@pytest.fixture(scope="session")
def synthetic():
    """Default simulated data set (seed 0): 1000 x 300, duplicates 15<-10, 250<-200, 230<-200."""
    return generate_synthetic(SyntheticSpec(seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
