import numpy as np
import pytest

from hybridch.mesh import build_cartesian_mesh

ACCEPTANCE_LINES = []


def line_mesh(n, lower=-1.0, upper=1.0, periodic=False):
    spec = {"left": ("px", "periodic"), "right": ("px", "periodic")} if periodic else {"left": "left", "right": "right"}
    return build_cartesian_mesh(1, [n], [(lower, upper)], spec)


def box_mesh(nx, ny, bounds=((0.0, 1.0), (0.0, 1.0)), periodic=""):
    spec = {}
    for axis, (lo, hi) in zip("xy", (("left", "right"), ("bottom", "top"))):
        if axis in periodic:
            spec[lo] = spec[hi] = (f"periodic_{axis}", "periodic")
        else:
            spec[lo], spec[hi] = lo, hi
    return build_cartesian_mesh(2, [nx, ny], list(bounds), spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
