import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fou2 import ModelParams, RngStream  # noqa: E402


@pytest.fixture
def params():
    return ModelParams(2.0, 0.7)


class ZeroNoise:
    """Random source that returns zeros, for linearity checks."""

    def normals(self, n, block=0):
        import numpy as np
        return np.zeros(n)


@pytest.fixture
def zero_rng():
    return ZeroNoise()


@pytest.fixture
def rng():
    return RngStream(20240611, 0)


def pytest_terminal_summary(terminalreporter):
    import _gate
    lines = _gate.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
