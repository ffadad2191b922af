import numpy as np
import pytest

from radial_blowup.spectral import build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid48():
    return build_grid(48, 3.0)


def random_poly_pair(grid, rng, degree=6, scale=1.0):
    """Pair of random polynomials in y, evaluated at the nodes."""
    c = rng.standard_normal((2, degree + 1)) * scale
    y = grid.nodes
    return grid.pair(np.polyval(c[0], y), np.polyval(c[1], y))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
