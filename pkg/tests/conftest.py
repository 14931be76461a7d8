import numpy as np
import pytest

from monoproj.lattice import GridFunction, Lattice

_ACCEPTANCE_LINES = []


def random_axis(rng, size):
    """Sorted distinct points in [0, 1]."""
    while True:
        ax = np.sort(rng.random(size))
        if size == 1 or np.all(np.diff(ax) > 1e-6):
            return ax


def random_grid(rng, shape, scale=1.0):
    lat = Lattice([random_axis(rng, s) for s in shape])
    return GridFunction(lat, scale * rng.standard_normal(lat.size))


def random_monotone(rng, lat):
    """A random monotone function: cumulative sums of nonnegative increments along every axis."""
    x = rng.exponential(size=lat.shape)
    for axis in range(x.ndim):
        x = np.cumsum(x, axis=axis)
    return GridFunction(lat, x.ravel() / x.max() - 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_report():
    def record(criterion, passed, detail):
        _ACCEPTANCE_LINES.append(f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
