# tests/conftest.py
import numpy as np
import pytest

from models.config import config_from_mapping
from models.dynamics import SolverConfig
from models.grid import RealField, build_grid


def _gaussian_density(grid, sigma=1.0, mass=1.0, center=(0.0, 0.0)):
    X1, X2 = grid.coords()
    r2 = (X1 - center[0]) ** 2 + (X2 - center[1]) ** 2
    return RealField(grid, mass * np.exp(-r2 / (2.0 * sigma ** 2)) / (2.0 * np.pi * sigma ** 2))


@pytest.fixture
def gaussian_density():
    """Factory: mass * exp(-|x-c|^2 / 2 sigma^2) / (2 pi sigma^2) on a grid."""
    return _gaussian_density


@pytest.fixture
def small_grid():
    return build_grid(6.0, 32)


@pytest.fixture
def run_grid():
    return build_grid(8.0, 64)


@pytest.fixture
def short_solver():
    return SolverConfig(epsilon=1.0, lam=1.0, dt=2e-3, T=0.02, samples=2)


@pytest.fixture
def fast_config(tmp_path):
    """Small grid, short horizon: every preset finishes in seconds."""
    def _make(**overrides):
        values = {
            "grid.L": 8.0,
            "grid.n": 64,
            "solver.T": 0.02,
            "solver.dt": 2e-3,
            "solver.samples": 2,
            "output.dir": str(tmp_path / "run"),
        }
        values.update(overrides)
        return config_from_mapping(values)
    return _make
