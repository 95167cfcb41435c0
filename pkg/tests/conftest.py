"""
Shared fixtures; the packages are imported top-level, as twingauge.py does
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core.sparse import from_dense  # noqa: E402
from core.tomo import Geometry  # noqa: E402
from utils.helpers import make_rng  # noqa: E402

FULL_SCALE = os.environ.get("TWINGAUGE_FULL_SCALE") == "1"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale experiments, up to a few minutes")


@pytest.fixture
def rng():
    return make_rng(20240601)


@pytest.fixture
def random_system():
    """Factory: dense Gaussian m x n matrix (as SparseMatrix) and its dense copy"""
    def make(rng, m, n, density=1.0):
        dense = rng.standard_normal((m, n))
        if density < 1.0:
            dense *= rng.random((m, n)) < density
        return from_dense(dense), dense
    return make


@pytest.fixture
def small_geometry():
    """16 x 16 image, 15 angles, 23 rays: a problem that solves in milliseconds"""
    return Geometry(image_size=16, angles=tuple(np.arange(0.0, 180.0, 12.0)), n_rays=23)


@pytest.fixture
def full_scale():
    if not FULL_SCALE:
        pytest.skip("set TWINGAUGE_FULL_SCALE=1 for full-scale experiments")
