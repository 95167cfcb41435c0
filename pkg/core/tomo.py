"""
Tomography Model - parallel-beam system matrix, noise and problem assembly
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from core.phantoms import Phantom
from core.sparse import SparseMatrix, from_arrays
from utils.errors import ConfigError, DegenerateDataError
from utils.helpers import make_rng

logger = logging.getLogger(__name__)

# intersections shorter than this are treated as corner touches
_MIN_SEGMENT = 1e-12


@dataclass(frozen=True)
class Geometry:
    """
    Parallel-beam scan of an N x N image with unit pixels

    The image square is [-N/2, N/2]^2, centred on the rotation axis.
    ``detector_span`` is the distance from the first to the last ray in
    image widths (sqrt(2) covers the image at every angle). A single ray
    always passes through the centre.
    """
    image_size: int
    angles: Tuple[float, ...]
    n_rays: int
    detector_span: float = math.sqrt(2.0)

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if self.image_size < 2:
            raise ConfigError(f"image size must be at least 2, got {self.image_size}")
        if not self.angles:
            raise ConfigError("at least one projection angle is required")
        if any(not 0.0 <= a < 180.0 for a in self.angles):
            raise ConfigError("projection angles must lie in [0, 180) degrees")
        if self.n_rays < 1:
            raise ConfigError(f"n_rays must be at least 1, got {self.n_rays}")
        if self.detector_span <= 0:
            raise ConfigError("detector span must be positive")

    @property
    def n_pixels(self) -> int:
        return self.image_size ** 2

    @property
    def n_measurements(self) -> int:
        return len(self.angles) * self.n_rays

    def ray_offsets(self) -> np.ndarray:
        """Signed distance of every ray from the rotation axis"""
        if self.n_rays == 1:
            return np.zeros(1)
        half = 0.5 * self.detector_span * self.image_size
        return np.linspace(-half, half, self.n_rays)


def _ray_entries(N: int, theta_deg: float, offset: float) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel indices (column-major) and intersection lengths of one ray"""
    theta = math.radians(theta_deg)
    dx, dy = math.cos(theta), math.sin(theta)
    px, py = -offset * dy, offset * dx
    half = N / 2.0

    # slab clipping against the image square
    t_lo, t_hi = -math.inf, math.inf
    for p, d in ((px, dx), (py, dy)):
        if abs(d) < 1e-15:
            if not -half <= p <= half:
                return np.zeros(0, dtype=np.int64), np.zeros(0)
            continue
        t1, t2 = (-half - p) / d, (half - p) / d
        t_lo, t_hi = max(t_lo, min(t1, t2)), min(t_hi, max(t1, t2))
    if t_hi - t_lo <= _MIN_SEGMENT:
        return np.zeros(0, dtype=np.int64), np.zeros(0)

    grid = np.arange(N + 1) - half
    crossings = [np.array([t_lo, t_hi])]
    for p, d in ((px, dx), (py, dy)):
        if abs(d) >= 1e-15:
            t = (grid - p) / d
            crossings.append(t[(t > t_lo) & (t < t_hi)])
    t = np.unique(np.concatenate(crossings))

    lengths = np.diff(t)
    keep = lengths > _MIN_SEGMENT
    mid = 0.5 * (t[:-1] + t[1:])[keep]
    lengths = lengths[keep]

    col = np.clip(np.floor(px + mid * dx + half).astype(np.int64), 0, N - 1)
    row = np.clip(np.floor(half - (py + mid * dy)).astype(np.int64), 0, N - 1)
    return col * N + row, lengths


def build_matrix(g: Geometry) -> SparseMatrix:
    """
    Line-model system matrix: entry (ray, pixel) is the exact chord length

    Rows are ordered angle-major, then by ray index; columns follow the
    column-major flattening of the image (row index fastest).
    """
    N = g.image_size
    offsets = g.ray_offsets()
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    # each ray is assembled on its own, then merged in ray order
    ray = 0
    for theta in g.angles:
        for s in offsets:
            pixels, lengths = _ray_entries(N, theta, float(s))
            rows.append(np.full(len(pixels), ray, dtype=np.int64))
            cols.append(pixels)
            vals.append(lengths)
            ray += 1

    A = from_arrays(g.n_measurements, g.n_pixels,
                    np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    logger.info("system matrix %dx%d with %d nonzeros (%d empty rows)",
                A.n_rows, A.n_cols, A.nnz, int(np.sum(A.row_norms_sq == 0)))
    return A


def add_noise(b_star: np.ndarray, eta: float, seed: Optional[int] = None) -> Tuple[np.ndarray, float]:
    """
    White Gaussian noise with expected relative level eta

    sigma = eta * ||b_star|| / sqrt(m), so E||db||^2 / ||b_star||^2 = eta^2.

    Raises:
        ConfigError: negative eta
        DegenerateDataError: zero data with eta > 0
    """
    if eta < 0:
        raise ConfigError(f"noise level must be non-negative, got {eta}")
    b_star = np.asarray(b_star, dtype=np.float64)
    norm = np.linalg.norm(b_star)
    if eta == 0:
        return b_star.copy(), 0.0
    if norm == 0:
        raise DegenerateDataError("cannot scale noise relative to a zero data vector")

    m = len(b_star)
    sigma = eta * norm / math.sqrt(m)
    delta = make_rng(seed).normal(0.0, sigma, size=m)
    return b_star + delta, float(sigma)


@dataclass
class TomoProblem:
    """Matrix, ground truth, clean and noisy data of one experiment"""
    A: SparseMatrix
    x_star: np.ndarray
    b_star: np.ndarray
    b: np.ndarray
    eta: float
    sigma: float
    geometry: Optional[Geometry] = None
    phantom: Optional[Phantom] = None
    noise_seed: Optional[int] = None

    @property
    def image_size(self) -> int:
        return int(round(math.sqrt(self.A.n_cols)))


def make_problem(geometry: Geometry, phantom: Phantom, eta: float, noise_seed: Optional[int] = None,
                 A: Optional[SparseMatrix] = None) -> TomoProblem:
    """
    Assemble a noisy problem; pass A to reuse a matrix built for the same geometry
    """
    if phantom.pixels.shape != (geometry.image_size, geometry.image_size):
        raise ConfigError(f"phantom is {phantom.pixels.shape}, geometry expects N={geometry.image_size}")
    A = build_matrix(geometry) if A is None else A
    x_star = phantom.pixels.flatten(order="F")
    b_star = A.matvec(x_star)
    b, sigma = add_noise(b_star, eta, noise_seed)
    return TomoProblem(A=A, x_star=x_star, b_star=b_star, b=b, eta=eta, sigma=sigma,
                       geometry=geometry, phantom=phantom, noise_seed=noise_seed)


def estimate_sigma(A: SparseMatrix, b: np.ndarray, x: np.ndarray) -> float:
    """A-posteriori noise estimate ||b - A x|| / sqrt(m) from a regularized solution"""
    return float(np.linalg.norm(b - A.matvec(x)) / math.sqrt(A.n_rows))


def image_from_vector(x: np.ndarray, N: int) -> np.ndarray:
    """Undo the column-major flattening"""
    return np.asarray(x).reshape((N, N), order="F")
