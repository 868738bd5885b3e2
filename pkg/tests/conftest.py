import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402


@pytest.fixture(scope="session")
def symbolic_m2():
    """Exact M=2 mass and x-convection matrices as float arrays."""
    mass, conv = oracles.symbolic_matrices((1, 0))
    return np.array(mass.tolist(), dtype=float), np.array(conv.tolist(), dtype=float)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record a named acceptance outcome; the summary prints one line each."""

    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
