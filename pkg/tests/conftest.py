import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class CountingRng:
    """Wraps a Generator and counts draws."""

    def __init__(self, seed=0):
        self._g = np.random.default_rng(seed)
        self.calls = 0

    def random(self, *a, **k):
        self.calls += 1
        return self._g.random(*a, **k)


@pytest.fixture
def counting_rng():
    return CountingRng()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
