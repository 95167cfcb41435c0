"""
Kaczmarz Engine - down-sweep and up-sweep row-action iterations
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from numba import njit

from core.sparse import SparseMatrix
from core.workmeter import WorkMeter
from utils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    DOWN = "down"
    UP = "up"

    @property
    def reverse(self) -> "Direction":
        return Direction.UP if self is Direction.DOWN else Direction.DOWN


@njit(cache=True, nogil=True)
def _sweep_kernel(row_ptr, col_idx, values, row_norms_sq, b, x, omega, start, stop, step):
    ops = 0
    for j in range(start, stop, step):
        norm_sq = row_norms_sq[j]
        if norm_sq == 0.0:
            continue
        lo = row_ptr[j]
        hi = row_ptr[j + 1]
        dot = 0.0
        for p in range(lo, hi):
            dot += values[p] * x[col_idx[p]]
        s = omega * (b[j] - dot) / norm_sq
        for p in range(lo, hi):
            x[col_idx[p]] += s * values[p]
        # multiply-add per nonzero in the dot and the update, 3 for the scale
        ops += 4 * (hi - lo) + 3
    return ops


def check_omega(omega: float):
    if not 0.0 < omega < 2.0:
        raise ConfigError(f"relaxation parameter omega must lie in (0, 2), got {omega}")


def check_system(A: SparseMatrix, b: np.ndarray, x: Optional[np.ndarray] = None):
    if np.ndim(b) != 1 or len(b) != A.n_rows:
        raise ShapeError(f"b must have length {A.n_rows}, got shape {np.shape(b)}")
    if x is not None and (np.ndim(x) != 1 or len(x) != A.n_cols):
        raise ShapeError(f"x must have length {A.n_cols}, got shape {np.shape(x)}")


def sweep_in_place(A: SparseMatrix, b: np.ndarray, x: np.ndarray, omega: float,
                   direction: Union[Direction, str] = Direction.DOWN,
                   meter: Optional[WorkMeter] = None) -> np.ndarray:
    """
    One full pass over all rows of A, updating x in place

    Rows with zero norm are skipped. The caller owns x; it must not be
    shared with a concurrent sweep.

    Args:
        A: System matrix
        b: Right-hand side
        x: Iterate, float64, overwritten
        omega: Relaxation parameter in (0, 2)
        direction: ``down`` visits rows 0..m-1, ``up`` visits m-1..0
        meter: Optional work meter charged with one sweep

    Returns:
        x
    """
    ops = counted_sweep(A, b, x, omega, direction)
    if meter is not None:
        meter.charge("sweep")
        meter.record_ops(ops)
    return x


def counted_sweep(A: SparseMatrix, b: np.ndarray, x: np.ndarray, omega: float,
                  direction: Union[Direction, str] = Direction.DOWN) -> int:
    """Sweep x in place; returns the floating-point operations performed"""
    direction = Direction(direction)
    if direction is Direction.DOWN:
        start, stop, step = 0, A.n_rows, 1
    else:
        start, stop, step = A.n_rows - 1, -1, -1
    return int(_sweep_kernel(A.row_ptr, A.col_idx, A.values, A.row_norms_sq,
                             np.ascontiguousarray(b, dtype=np.float64), x, float(omega), start, stop, step))


@dataclass
class SweepState:
    """Iterate, relaxation, direction and sweep counter of one Kaczmarz run"""
    x: np.ndarray
    omega: float = 1.0
    direction: Direction = Direction.DOWN
    k: int = 0

    def __post_init__(self):
        check_omega(self.omega)
        self.direction = Direction(self.direction)
        self.x = np.array(self.x, dtype=np.float64)


def sweep(A: SparseMatrix, b: np.ndarray, state: SweepState,
          meter: Optional[WorkMeter] = None) -> SweepState:
    """Advance the state by one sweep in its own direction"""
    check_system(A, b, state.x)
    sweep_in_place(A, b, state.x, state.omega, state.direction, meter)
    state.k += 1
    return state


@dataclass
class History:
    """Per-sweep diagnostics; entry i belongs to the iterate after sweep i+1"""
    true_error: List[float] = field(default_factory=list)
    residual_norm: List[float] = field(default_factory=list)
    gauge: List[float] = field(default_factory=list)
    trace: List[float] = field(default_factory=list)
    score: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return max(len(self.true_error), len(self.residual_norm), len(self.gauge))

    def as_arrays(self) -> dict:
        return {name: np.asarray(getattr(self, name), dtype=np.float64)
                for name in ("true_error", "residual_norm", "gauge", "trace", "score")}

    def write_csv(self, path: Union[str, Path]) -> Path:
        """Write k,true_error,residual_norm,gauge,t_k,score; missing cells stay empty"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        columns = [self.true_error, self.residual_norm, self.gauge, self.trace, self.score]

        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["k", "true_error", "residual_norm", "gauge", "t_k", "score"])
            for i in range(len(self)):
                row = [i + 1]
                for col in columns:
                    row.append(repr(float(col[i])) if i < len(col) else "")
                writer.writerow(row)
        return path


def relative_error(x: np.ndarray, x_star: np.ndarray) -> float:
    denom = np.linalg.norm(x_star)
    err = np.linalg.norm(x - x_star)
    return float(err / denom) if denom > 0 else float(err)


def run(A: SparseMatrix, b: np.ndarray, omega: float = 1.0,
        direction: Union[Direction, str] = Direction.DOWN, n_sweeps: int = 1,
        x0: Optional[np.ndarray] = None, x_star: Optional[np.ndarray] = None,
        meter: Optional[WorkMeter] = None) -> Tuple[np.ndarray, History]:
    """
    Plain Kaczmarz with a fixed relaxation parameter

    Args:
        A: System matrix
        b: Data
        omega: Relaxation parameter in (0, 2)
        direction: Row order of every sweep
        n_sweeps: Number of sweeps, at least 1
        x0: Starting vector, zero by default
        x_star: Ground truth; when given the relative error is recorded

    Returns:
        Final iterate and its History
    """
    if n_sweeps < 1:
        raise ConfigError(f"n_sweeps must be at least 1, got {n_sweeps}")
    x0 = np.zeros(A.n_cols) if x0 is None else x0
    check_system(A, b, x0)
    if x_star is not None:
        check_system(A, b, x_star)

    state = SweepState(x=x0, omega=omega, direction=direction)
    history = History()
    b = np.asarray(b, dtype=np.float64)

    for _ in range(n_sweeps):
        sweep(A, b, state, meter)
        history.residual_norm.append(float(np.linalg.norm(b - A.matvec(state.x))))
        if x_star is not None:
            history.true_error.append(relative_error(state.x, x_star))

    logger.debug("kaczmarz %s: %d sweeps, final residual %.4e",
                 state.direction.value, n_sweeps, history.residual_norm[-1])
    return state.x, history


def sweep_pool(parallel: bool):
    """Two-thread executor for independent sweeps, or a no-op context"""
    return ThreadPoolExecutor(max_workers=2) if parallel else nullcontext()
