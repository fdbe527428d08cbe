import json
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings as hypothesis_settings

from src.config import settings
from src.measures import Axis, DiscreteMeasure, SupportGrid

hypothesis_settings.register_profile("fast", max_examples=25, deadline=None,
                                     suppress_health_check=[HealthCheck.too_slow])
hypothesis_settings.register_profile("ci", max_examples=100, deadline=None,
                                     suppress_health_check=[HealthCheck.too_slow])
hypothesis_settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

FIXTURES = Path(__file__).parent / "fixtures"

settings.progress = False


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def fixture_path():
    def _path(name: str) -> Path:
        return FIXTURES / name
    return _path


@pytest.fixture
def load_fixture():
    def _load(name: str) -> dict:
        return json.loads((FIXTURES / name).read_text())
    return _load


@pytest.fixture
def uniform_square():
    """Uniform marginals on {0, 1} x {0, 1}."""
    grid = SupportGrid([0.0, 1.0], [0.0, 1.0])
    mu = DiscreteMeasure(grid.X, [0.5, 0.5], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.5, 0.5], Axis.Y)
    return grid, mu, nu


@pytest.fixture
def binary_spread():
    """mu = delta_0 spread to nu = (delta_-1 + delta_1) / 2."""
    grid = SupportGrid([0.0], [-1.0, 1.0])
    mu = DiscreteMeasure(grid.X, [1.0], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.5, 0.5], Axis.Y)
    return grid, mu, nu


@pytest.fixture
def five_point_pair():
    """mu = (delta_-1 + delta_1) / 2 and nu = delta_-2/4 + delta_0/2 + delta_2/4 on {-2, ..., 2}."""
    pts = [-2.0, -1.0, 0.0, 1.0, 2.0]
    grid = SupportGrid(pts, pts)
    mu = DiscreteMeasure(grid.X, [0.0, 0.5, 0.0, 0.5, 0.0], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.25, 0.0, 0.5, 0.0, 0.25], Axis.Y)
    return grid, mu, nu
