"""
Phantom Gallery - seeded synthetic ground-truth images with values in [0, 1]
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.spatial import cKDTree

from utils.errors import ConfigError
from utils.helpers import make_rng

logger = logging.getLogger(__name__)

MIN_SIZE = 16

# Modified Shepp-Logan (Toft): intensity, semi-axes a, b, centre x0, y0, rotation in degrees
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.8, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.1, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.1, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.1, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.1, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)


@dataclass
class Phantom:
    """An N x N image; row 0 is the top of the picture"""
    kind: str
    pixels: np.ndarray
    seed: Optional[int] = None

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


def _grid(N: int):
    """Pixel-centre coordinates in (-1, 1); y points up"""
    c = (np.arange(N) - (N - 1) / 2.0) / (N / 2.0)
    X, Y = np.meshgrid(c, -c)
    return X, Y


def _shepplogan(N: int, rng: np.random.Generator) -> np.ndarray:
    X, Y = _grid(N)
    image = np.zeros((N, N))
    for value, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        phi = math.radians(phi)
        xr = (X - x0) * math.cos(phi) + (Y - y0) * math.sin(phi)
        yr = -(X - x0) * math.sin(phi) + (Y - y0) * math.cos(phi)
        image[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
    return image


def _smooth(N: int, rng: np.random.Generator) -> np.ndarray:
    X, Y = _grid(N)
    image = np.zeros((N, N))
    for _ in range(4):
        cx, cy = rng.uniform(-0.5, 0.5, size=2)
        width = rng.uniform(0.15, 0.35)
        image += np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * width ** 2))
    return image / image.max()


def _disk_layers(N: int, rng: np.random.Generator, levels: Sequence[float], n_disks: int) -> np.ndarray:
    """Random disks inside the unit circle painted with seeded levels, later disks on top"""
    X, Y = _grid(N)
    image = np.zeros((N, N))
    for _ in range(n_disks):
        r = rng.uniform(0.06, 0.22)
        rho = rng.uniform(0.0, 0.85 - r)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        cx, cy = rho * math.cos(phi), rho * math.sin(phi)
        level = levels[rng.integers(len(levels))]
        image[(X - cx) ** 2 + (Y - cy) ** 2 <= r * r] = level
    return image


def _binary(N: int, rng: np.random.Generator) -> np.ndarray:
    union = _disk_layers(N, rng, (1.0,), n_disks=20)
    return (union > 0.5).astype(np.float64)


def _threephases(N: int, rng: np.random.Generator) -> np.ndarray:
    return _disk_layers(N, rng, (0.5, 1.0), n_disks=40)


def _fourphases(N: int, rng: np.random.Generator) -> np.ndarray:
    return _disk_layers(N, rng, (1.0 / 3.0, 2.0 / 3.0, 1.0), n_disks=40)


def _threephasessmooth(N: int, rng: np.random.Generator) -> np.ndarray:
    smooth = gaussian_filter(_threephases(N, rng), sigma=max(1.0, N / 64.0))
    peak = smooth.max()
    return smooth / peak if peak > 0 else smooth


def grain_count(N: int) -> int:
    return math.ceil(0.25 * N)


def _grains(N: int, rng: np.random.Generator) -> np.ndarray:
    """Voronoi cells around pixel-centred sites, one uniform intensity per cell"""
    K = grain_count(N)
    sites = rng.choice(N * N, size=K, replace=False)
    site_rc = np.column_stack(np.unravel_index(sites, (N, N)))
    intensities = rng.uniform(0.0, 1.0, size=K)

    rr, cc = np.mgrid[0:N, 0:N]
    _, owner = cKDTree(site_rc).query(np.column_stack([rr.ravel(), cc.ravel()]))
    return intensities[owner].reshape(N, N)


PHANTOM_KINDS: Dict[str, Callable[[int, np.random.Generator], np.ndarray]] = {
    "shepplogan": _shepplogan,
    "smooth": _smooth,
    "binary": _binary,
    "threephases": _threephases,
    "threephasessmooth": _threephasessmooth,
    "fourphases": _fourphases,
    "grains": _grains,
}


def make_phantom(kind: str, N: int, seed: Optional[int] = 0) -> Phantom:
    """
    Deterministic phantom for (kind, N, seed)

    Raises:
        ConfigError: unknown kind or N below the minimum size
    """
    if kind not in PHANTOM_KINDS:
        raise ConfigError(f"unknown phantom kind '{kind}'; choose from {', '.join(PHANTOM_KINDS)}")
    if N < MIN_SIZE:
        raise ConfigError(f"phantom size must be at least {MIN_SIZE}, got {N}")

    image = PHANTOM_KINDS[kind](N, make_rng(seed))
    image = np.clip(image, 0.0, 1.0)
    logger.debug("phantom %s N=%d seed=%s: range [%.3f, %.3f]", kind, N, seed, image.min(), image.max())
    return Phantom(kind=kind, pixels=image, seed=seed)
