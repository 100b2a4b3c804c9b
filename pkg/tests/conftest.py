import numpy as np
import pytest

from contentlab import GridMap


def line_map(values, K):
    """1-D map x -> values[i] on the 2^K + 1 lattice points of [0, 1]."""
    return GridMap.from_function(lambda x: np.asarray(values)[np.rint(x[:, 0] * 2 ** K).astype(int)], 1, 0, K)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
