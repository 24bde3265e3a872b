"""Pytest configuration and shared fixtures."""

from pathlib import Path

import numpy as np
import pytest

from rnpsim.config.settings import ChoConfig, SolverConfig
from rnpsim.core.grid import Grid
from rnpsim.core.models import PotentialParams, ReactionCoeffs

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def configs_dir():
    """Directory of the shipped example configs."""
    return CONFIGS_DIR


@pytest.fixture
def grid():
    """Small square grid on the unit square."""
    return Grid(8, 8)


@pytest.fixture
def rect_grid():
    """Non-square grid with unequal spacings."""
    return Grid(6, 10, 1.5, 2.0)


@pytest.fixture
def rng():
    """Seeded generator for field sampling."""
    return np.random.default_rng(1234)


@pytest.fixture
def coeffs():
    """Baseline rates with the biologically relevant threshold of order 1e-2."""
    return ReactionCoeffs(c1=1.0, c2=0.01, c3=1.0, c4=0.01, T_final=0.02, area=1.0)


@pytest.fixture
def params():
    """Flory-Huggins parameters with the baseline Yosida parameter."""
    return PotentialParams(lam=1e-3)


@pytest.fixture
def small_config():
    """Coupled run on a 16 x 16 grid, a few dozen steps."""
    return SolverConfig(nx=16, ny=16, T_final=0.01, output_every=5)


@pytest.fixture
def small_cho_config():
    """Scalar Oono run from the pure phase on a 16 x 16 grid."""
    return ChoConfig(nx=16, ny=16, tau=1e-3, T_final=0.02, output_every=5)


@pytest.fixture
def smooth_phases():
    """Smooth phase pair strictly inside the simplex on a 16 x 16 grid."""

    def build(g: Grid) -> np.ndarray:
        x, y = g.centers()
        phi1 = 0.25 + 0.1 * np.cos(np.pi * x / g.lx) * np.cos(np.pi * y / g.ly)
        phi2 = 0.25 + 0.1 * np.sin(2.0 * np.pi * x / g.lx) * np.cos(np.pi * y / g.ly)
        return np.stack([phi1, phi2])

    return build
