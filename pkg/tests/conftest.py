import numpy as np
import pytest

from patrelax.forward import DetectorGeometry, PatForwardModel, TimeGrid
from patrelax.image import ImageGrid


def dense_matrix(apply, in_shape):
    """Assemble the matrix of a linear map by applying it to unit basis arrays."""
    size = int(np.prod(in_shape))
    cols = []
    for k in range(size):
        e = np.zeros(size)
        e[k] = 1.0
        cols.append(np.asarray(apply(e.reshape(in_shape))).ravel())
    return np.array(cols).T


@pytest.fixture(scope="session")
def tiny_model():
    grid = ImageGrid(8, 1.0)
    geom = DetectorGeometry(4, 1.2)
    return PatForwardModel(grid, geom, TimeGrid.covering(geom, grid, 16))


@pytest.fixture(scope="session")
def small_model():
    grid = ImageGrid(32, 1.0)
    geom = DetectorGeometry(16, 1.2)
    return PatForwardModel(grid, geom, TimeGrid.covering(geom, grid, 64))


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
