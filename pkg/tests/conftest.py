import numpy as np
import pytest

from dvarskit import Mask, SimulationSpec, TimeSeriesVolume, simulate_ar1_volume


def full_mask(v):
    return Mask(np.ones(v.n_voxels, dtype=bool), v.dims)


@pytest.fixture
def two_voxel():
    return TimeSeriesVolume([[1, 3, 2], [2, 2, 4]], (2, 1, 1), source="fixture")


@pytest.fixture(scope="session")
def small_null():
    spec = SimulationSpec((10, 10, 5), 200, mu=(500, 1500), sigma=(5, 20), rho=(0, 0.5), seed=3)
    return simulate_ar1_volume(spec)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
