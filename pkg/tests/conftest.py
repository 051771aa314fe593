import warnings

import pytest

from graspkit.dataset import build_vpt
from graspkit.scene import KNOWN_OBJECTS

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_vpt():
    """Two objects, 40 grasps each: 160 records."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_vpt(KNOWN_OBJECTS[:2], per_object=40, seed=3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
