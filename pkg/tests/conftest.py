import numpy as np
import pytest

from se3kernel.fbc import Tractogram
from se3kernel.kernel import DiffusionParams
from se3kernel.sphere import icosphere

FIG_PARAMS = DiffusionParams(1.0, 0.02, 2.0)
FBC_PARAMS = DiffusionParams(1.0, 0.02, 4.0)


def bundle_fibers(n_points=21):
    """
    20 straight fibers along z on a 4 x 5 lattice of unit spacing, plus one
    fiber running between them up to its midpoint and leaving at 45 degrees.
    Returns the fibers and the index of the divergence point of the last one.
    """
    z = np.arange(n_points, dtype=float)
    fibers = [np.column_stack([np.full(n_points, x), np.full(n_points, y), z])
              for x in range(4) for y in range(5)]
    mid = n_points // 2
    pre = np.column_stack([np.full(mid + 1, 1.5), np.full(mid + 1, 2.0), z[:mid + 1]])
    k = np.arange(1, n_points - mid)[:, None]
    post = pre[-1] + k * np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
    fibers.append(np.vstack([pre, post]))
    return fibers, mid


@pytest.fixture(scope="session")
def sphere1():
    return icosphere(1)


@pytest.fixture(scope="session")
def bundle():
    fibers, mid = bundle_fibers()
    return Tractogram.from_point_lists(fibers), mid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
