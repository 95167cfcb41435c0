"""
Gauge Methods - error gauge, Twin Algorithm and Mutual-Step Algorithm
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from core.kaczmarz import (Direction, History, check_omega, check_system, counted_sweep, relative_error,
                           sweep_pool)
from core.sparse import SparseMatrix
from core.workmeter import WorkMeter
from utils.errors import ConfigError, ShapeError
from utils.helpers import write_csv

logger = logging.getLogger(__name__)

DET_EPS = 1e-14


def error_gauge(x: np.ndarray, x_twin: np.ndarray) -> float:
    """||x - x_twin||, the computable stand-in for the true error"""
    if np.shape(x) != np.shape(x_twin):
        raise ShapeError(f"gauge needs equal shapes, got {np.shape(x)} and {np.shape(x_twin)}")
    return float(np.linalg.norm(np.asarray(x) - np.asarray(x_twin)))


@dataclass
class MinimumTracker:
    """
    Best-so-far value with a slack counter

    ``update`` returns True when the value is a strict new minimum; the
    counter of non-improving updates then resets. ``expired`` turns True
    once ``slack`` updates in a row brought no new minimum.
    """
    slack: int
    best_value: float = math.inf
    best_index: int = -1
    since_best: int = 0

    def update(self, index: int, value: float) -> bool:
        if value < self.best_value:
            self.best_value = value
            self.best_index = index
            self.since_best = 0
            return True
        self.since_best += 1
        return False

    @property
    def expired(self) -> bool:
        return self.since_best >= self.slack


@dataclass
class TwinConfig:
    omega: float = 1.0
    maxits: int = 300
    slack: int = 10
    parallel: bool = False

    def __post_init__(self):
        check_omega(self.omega)
        if self.maxits < 1:
            raise ConfigError(f"maxits must be at least 1, got {self.maxits}")
        if self.slack < 1:
            raise ConfigError(f"slack must be at least 1, got {self.slack}")


@dataclass
class MutualStepConfig:
    omega: float = 1.0
    maxits: int = 300
    tol: float = 1e-4
    parallel: bool = False

    def __post_init__(self):
        check_omega(self.omega)
        if self.maxits < 1:
            raise ConfigError(f"maxits must be at least 1, got {self.maxits}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")


class StepStatus(str, Enum):
    OK = "ok"
    DEGENERATE = "degenerate"


@dataclass
class GaugeRunResult:
    """Output of a gauge-driven run"""
    method: str
    x_out: np.ndarray
    k_stop: int
    gauge_history: List[float]
    step_history: List[Tuple[float, float]] = field(default_factory=list)
    work_units: float = 0.0
    measured_units: float = 0.0
    stop_reason: str = ""
    history: History = field(default_factory=History)
    relative_error: Optional[float] = None
    final_inner_products: Optional[Dict[str, float]] = None

    def to_dict(self) -> Dict:
        """JSON summary (the iterate itself is exported separately)"""
        return {
            'method': self.method,
            'k_stop': self.k_stop,
            'stop_reason': self.stop_reason,
            'sweeps_executed': len(self.gauge_history),
            'final_gauge': self.gauge_history[-1] if self.gauge_history else None,
            'relative_error': self.relative_error,
            'work_units': self.work_units,
            'measured_work_units': self.measured_units,
            'steps': [list(s) for s in self.step_history],
        }

    def write_csv(self, path: Union[str, Path]) -> Path:
        """k, gauge, alpha, beta, true_error; k counts sweep pairs"""
        errors = self.history.true_error
        rows = []
        for i, g in enumerate(self.gauge_history):
            alpha, beta = (None, None)
            if self.method == "msa" and 0 < i <= len(self.step_history):
                alpha, beta = self.step_history[i - 1]
            rows.append([i + 1, g, alpha, beta, errors[i] if i < len(errors) else None])
        return write_csv(path, ["k", "gauge", "alpha", "beta", "true_error"], rows)


def _paired_sweeps(A: SparseMatrix, b: np.ndarray, x: np.ndarray, x_twin: np.ndarray, omega: float,
                   directions: Tuple[Direction, Direction], meter: Optional[WorkMeter],
                   pool: Optional[ThreadPoolExecutor]):
    """Advance x and x_twin by one sweep each; the two touch disjoint memory"""
    if pool is None:
        ops = counted_sweep(A, b, x, omega, directions[0])
        ops += counted_sweep(A, b, x_twin, omega, directions[1])
    else:
        first = pool.submit(counted_sweep, A, b, x, omega, directions[0])
        second = pool.submit(counted_sweep, A, b, x_twin, omega, directions[1])
        ops = first.result() + second.result()

    if meter is not None:
        meter.charge("sweep", 2)
        meter.record_ops(ops)


def _charge(meter: Optional[WorkMeter], event: str, ops: int):
    if meter is not None:
        meter.charge(event)
        meter.record_ops(ops)


def twin_algorithm(A: SparseMatrix, b: np.ndarray, cfg: TwinConfig, x_star: Optional[np.ndarray] = None,
                   meter: Optional[WorkMeter] = None,
                   directions: Tuple[Direction, Direction] = (Direction.DOWN, Direction.UP)) -> GaugeRunResult:
    """
    Paired down/up Kaczmarz, stopped at the gauge minimum

    Both iterates start at zero. After every pair of sweeps the gauge is
    compared with the best seen so far; the run ends when ``cfg.slack``
    further pairs bring no new minimum, or at ``cfg.maxits``.

    Args:
        A: System matrix
        b: Data
        cfg: Relaxation, iteration limit and slack
        x_star: Ground truth, only used to record true errors
        meter: Work meter charged per sweep and gauge
        directions: Row orders of the two iterates

    Returns:
        GaugeRunResult whose x_out is the average of the best pair and
        whose k_stop is that pair's sweep count
    """
    check_system(A, b)
    meter = meter if meter is not None else WorkMeter.for_matrix(A)
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros(A.n_cols)
    x_twin = np.zeros(A.n_cols)

    tracker = MinimumTracker(cfg.slack)
    history = History()
    best_average = x.copy()
    reason = "maxits"

    with sweep_pool(cfg.parallel) as pool:
        for k in range(1, cfg.maxits + 1):
            _paired_sweeps(A, b, x, x_twin, cfg.omega, directions, meter, pool)
            gauge = error_gauge(x, x_twin)
            # one difference, then squares and sums for the norm
            _charge(meter, "gauge", 3 * x.size)
            history.gauge.append(gauge)
            if x_star is not None:
                history.true_error.append(relative_error(0.5 * (x + x_twin), x_star))

            if tracker.update(k, gauge):
                best_average = 0.5 * (x + x_twin)
                meter.record_ops(2 * x.size)
            elif tracker.expired:
                reason = "slack"
                break

    result = GaugeRunResult(
        method="twin",
        x_out=best_average,
        k_stop=tracker.best_index,
        gauge_history=history.gauge,
        work_units=meter.work_units,
        measured_units=meter.measured_units,
        stop_reason=reason,
        history=history,
        relative_error=relative_error(best_average, x_star) if x_star is not None else None,
    )
    logger.info("twin: stopped by %s after %d pairs, best pair %d (gauge %.4e), %.2f work units",
                reason, len(history.gauge), result.k_stop, tracker.best_value, result.work_units)
    return result

def solve_step_sizes(w: np.ndarray, w_twin: np.ndarray, x: np.ndarray,
                     x_twin: np.ndarray) -> Tuple[float, float, StepStatus]:
    """
    Step sizes minimising ||(x + alpha w) - (x_twin + beta w_twin)||

    Solves the 2x2 normal equations by Cramer's rule. A determinant at or
    below DET_EPS * ||w||^2 ||w_twin||^2 (collinear or vanishing directions)
    gives (0, 0) with status DEGENERATE.
    """
    shape = np.shape(w)
    if any(np.shape(v) != shape for v in (w_twin, x, x_twin)):
        raise ShapeError("step-size vectors must all have the same shape")

    d = np.asarray(x) - np.asarray(x_twin)
    ww = float(np.dot(w, w))
    tt = float(np.dot(w_twin, w_twin))
    wt = float(np.dot(w, w_twin))
    rhs_1 = -float(np.dot(w, d))
    rhs_2 = float(np.dot(w_twin, d))

    det = ww * tt - wt * wt
    if det <= DET_EPS * ww * tt:
        return 0.0, 0.0, StepStatus.DEGENERATE

    alpha = (tt * rhs_1 + wt * rhs_2) / det
    beta = (wt * rhs_1 + ww * rhs_2) / det
    return alpha, beta, StepStatus.OK

def mutual_step(A: SparseMatrix, b: np.ndarray, cfg: MutualStepConfig, x_star: Optional[np.ndarray] = None,
                meter: Optional[WorkMeter] = None) -> GaugeRunResult:
    """
    Mutual-Step Algorithm: down and up sweeps with gauge-optimal step sizes

    x starts as one down-sweep from zero and x_twin as one up-sweep. Each
    iteration sweeps both, takes w = K_down(x) - x and w_twin = K_up(x_twin) - x_twin
    as search directions and moves along them with the step sizes that
    minimise the next gauge. Stops when |alpha| + |beta| < tol, when both
    steps are negative, when the 2x2 system is degenerate, or at maxits.

    Returns:
        GaugeRunResult with gauge_history[0] the gauge of the initial pair
        and one entry per accepted step; x_out averages the final pair
    """
    check_system(A, b)
    meter = meter if meter is not None else WorkMeter.for_matrix(A)
    b = np.asarray(b, dtype=np.float64)
    directions = (Direction.DOWN, Direction.UP)

    x = np.zeros(A.n_cols)
    x_twin = np.zeros(A.n_cols)
    history = History()
    steps: List[Tuple[float, float]] = []
    reason = "maxits"
    inner = None

    def record(gauge: float):
        history.gauge.append(gauge)
        if x_star is not None:
            history.true_error.append(relative_error(0.5 * (x + x_twin), x_star))

    with sweep_pool(cfg.parallel) as pool:
        _paired_sweeps(A, b, x, x_twin, cfg.omega, directions, meter, pool)
        record(error_gauge(x, x_twin))
        _charge(meter, "gauge", 3 * x.size)
        pairs = 1
        n = x.size

        for _ in range(cfg.maxits):
            w = x.copy()
            w_twin = x_twin.copy()
            _paired_sweeps(A, b, w, w_twin, cfg.omega, directions, meter, pool)
            pairs += 1
            w -= x
            w_twin -= x_twin

            alpha, beta, status = solve_step_sizes(w, w_twin, x, x_twin)
            # the two direction differences, then one difference and five inner products
            _charge(meter, "step_solve", 2 * n + 11 * n)
            steps.append((alpha, beta))

            if status is StepStatus.DEGENERATE:
                logger.warning("mutual-step: degenerate step system after %d pairs, stopping", pairs)
                reason = "degenerate"
            elif abs(alpha) + abs(beta) < cfg.tol:
                reason = "tol"
            elif alpha < 0 and beta < 0:
                reason = "negative"
            else:
                x += alpha * w
                x_twin += beta * w_twin
                # the gauge is part of the step_solve cost
                record(error_gauge(x, x_twin))
                meter.record_ops(4 * n + 3 * n)
                logger.debug("mutual-step pair %d: alpha=%.4f beta=%.4f gauge=%.4e",
                             pairs, alpha, beta, history.gauge[-1])
                continue

            d = x - x_twin
            inner = {
                'w_dot_d': float(np.dot(w, d)),
                'w_twin_dot_d': float(np.dot(w_twin, d)),
                'w_norm': float(np.linalg.norm(w)),
                'w_twin_norm': float(np.linalg.norm(w_twin)),
                'gauge': float(np.linalg.norm(d)),
            }
            break

    x_out = 0.5 * (x + x_twin)
    result = GaugeRunResult(
        method="msa",
        x_out=x_out,
        k_stop=pairs,
        gauge_history=history.gauge,
        step_history=steps,
        work_units=meter.work_units,
        measured_units=meter.measured_units,
        stop_reason=reason,
        history=history,
        relative_error=relative_error(x_out, x_star) if x_star is not None else None,
        final_inner_products=inner,
    )
    logger.info("mutual-step: stopped by %s after %d pairs, gauge %.4e, %.2f work units",
                reason, pairs, history.gauge[-1], result.work_units)
    return result
