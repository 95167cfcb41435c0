"""
Statistical Stopping Rules - trace probe, UPRE / GCV / CDP scores, rule-driven Kaczmarz
"""

import importlib
import inspect
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from core.kaczmarz import (Direction, History, check_omega, check_system, counted_sweep, relative_error,
                          sweep_in_place, sweep_pool)
from core.sparse import SparseMatrix
from core.workmeter import WorkMeter
from plugins.base_plugin import IterationStats, StoppingRulePlugin
from utils.errors import ConfigError, DegenerateDenominator
from utils.helpers import make_rng

logger = logging.getLogger(__name__)

PLUGINS_DIR = Path(__file__).resolve().parent.parent / "plugins"


@dataclass
class TraceProbe:
    """
    Monte-Carlo probe of tr(A A#_k)

    z is the Kaczmarz iterate for data w from a zero start, so A z = A A#_k w
    and t = w^T A z has expectation tr(A A#_k). ``atw`` caches A^T w so the
    estimate costs one inner product of length n.
    """
    w: np.ndarray
    z: np.ndarray
    atw: np.ndarray
    t: float = 0.0
    k: int = 0
    last_ops: int = 0


def make_probe(A: SparseMatrix, seed: Optional[int] = None) -> TraceProbe:
    w = make_rng(seed).standard_normal(A.n_rows)
    return TraceProbe(w=w, z=np.zeros(A.n_cols), atw=A.matvec_t(w))


def trace_update(A: SparseMatrix, probe: TraceProbe, omega: float,
                 direction: Union[Direction, str] = Direction.DOWN,
                 meter: Optional[WorkMeter] = None) -> TraceProbe:
    """Advance the probe by one sweep on data w and refresh t"""
    sweep_ops = counted_sweep(A, probe.w, probe.z, omega, direction)
    probe.t = float(np.dot(probe.atw, probe.z))
    probe.k += 1
    probe.last_ops = sweep_ops + 2 * probe.z.size
    if meter is not None:
        meter.charge("trace_update").charge("inner_product")
        meter.record_ops(probe.last_ops)
    return probe


def upre_score(residual_norm_sq: float, t_k: float, sigma: float, m: int) -> float:
    """U_k = ||b - A x_k||^2 + 2 sigma^2 t_k - sigma^2 m"""
    return residual_norm_sq + 2.0 * sigma * sigma * t_k - sigma * sigma * m


def gcv_score(residual_norm_sq: float, t_k: float, m: int) -> float:
    """
    G_k = ||b - A x_k||^2 / (m - t_k)^2

    Raises:
        DegenerateDenominator: t_k >= m
    """
    if t_k >= m:
        raise DegenerateDenominator(f"GCV undefined: trace estimate {t_k:.4g} >= m = {m}")
    return residual_norm_sq / (m - t_k) ** 2


def cdp_check(residual_norm_sq: float, t_k: float, sigma: float, m: int) -> bool:
    """
    ||b - A x_k||^2 <= sigma^2 (m - t_k)

    A negative right-hand side (t_k > m under probe noise) counts as False.
    """
    rhs = sigma * sigma * (m - t_k)
    if rhs < 0:
        logger.warning("CDP right-hand side negative (t_k=%.4g > m=%d), condition treated as false", t_k, m)
        return False
    return residual_norm_sq <= rhs


def oracle_stop(true_error_history: List[float]) -> int:
    """0-based index of the smallest error; first one on ties"""
    if len(true_error_history) == 0:
        raise ConfigError("oracle needs a nonempty error history")
    return int(np.argmin(np.asarray(true_error_history, dtype=np.float64)))


def load_rules(plugins_dir: Union[str, Path] = PLUGINS_DIR) -> Dict[str, StoppingRulePlugin]:
    """Dynamically load every stopping-rule plugin, keyed by rule name"""
    rules: Dict[str, StoppingRulePlugin] = {}
    plugins_path = Path(plugins_dir)

    if not plugins_path.exists():
        logger.warning("plugins directory not found: %s", plugins_path)
        return rules

    plugin_files = sorted(f for f in plugins_path.glob("*.py")
                          if f.name not in ("__init__.py", "base_plugin.py"))

    for plugin_file in plugin_files:
        try:
            module = importlib.import_module(f"plugins.{plugin_file.stem}")
        except ImportError as e:
            logger.warning("failed to load %s: %s", plugin_file.name, e)
            continue

        # every concrete subclass of the base is a rule
        for name, obj in inspect.getmembers(module, inspect.isclass):
            if issubclass(obj, StoppingRulePlugin) and not inspect.isabstract(obj):
                rule = obj()
                if not rule.is_enabled():
                    logger.debug("skipping disabled stopping rule %s", rule.name)
                    continue
                rules[rule.name] = rule
                logger.debug("loaded stopping rule %s (%s)", rule.name, name)

    return rules


def get_rule(name: str) -> StoppingRulePlugin:
    rules = load_rules()
    if name not in rules:
        raise ConfigError(f"unknown stopping rule '{name}'; choose from {', '.join(sorted(rules))}")
    return rules[name]


@dataclass
class RuleState:
    """Sequential fold of a rule over the sweeps of one run"""
    rule: StoppingRulePlugin
    sigma: Optional[float] = None
    scores: List[Optional[float]] = field(default_factory=list)
    stopped_at: Optional[int] = None
    best_index: Optional[int] = None
    best_score: float = math.inf
    skipped: int = 0

    def observe(self, stats: IterationStats) -> bool:
        """
        Record the score of sweep stats.k

        Returns:
            True when a first-hit rule triggers at this sweep
        """
        score = self.rule.score(stats)
        self.scores.append(score)

        if self.rule.selection == "argmin":
            if score is None:
                self.skipped += 1
            elif score < self.best_score:
                self.best_score = score
                self.best_index = stats.k
            return False

        if self.rule.selection == "first" and self.rule.triggered(stats):
            self.stopped_at = stats.k
            return True
        return False


@dataclass
class RunResult:
    """Reconstruction and diagnostics of one rule-driven Kaczmarz run"""
    rule: str
    x: np.ndarray
    k_stop: int
    sweeps_executed: int
    history: History
    work_units: float
    measured_units: float
    stop_reason: str
    relative_error: Optional[float] = None
    stopped_at: Optional[int] = None

    def to_dict(self) -> Dict:
        return {
            'method': 'kaczmarz',
            'rule': self.rule,
            'k_stop': self.k_stop,
            'stopped_at': self.stopped_at,
            'stop_reason': self.stop_reason,
            'sweeps_executed': self.sweeps_executed,
            'relative_error': self.relative_error,
            'work_units': self.work_units,
            'measured_work_units': self.measured_units,
        }

    def write_csv(self, path: Union[str, Path]) -> Path:
        return self.history.write_csv(path)


def run_with_rule(A: SparseMatrix, b: np.ndarray, omega: float = 1.0, rule: str = "none", maxits: int = 300,
                  sigma: Optional[float] = None, x_star: Optional[np.ndarray] = None, seed: Optional[int] = 0,
                  meter: Optional[WorkMeter] = None, parallel: bool = False) -> RunResult:
    """
    Down-sweep Kaczmarz stopped by a statistical rule or the oracle

    Argmin rules (upre, gcv, oracle) run to maxits and return the best
    scoring iterate, kept in memory. CDP stops at the first sweep that
    satisfies the discrepancy condition. ``none`` runs all maxits sweeps.

    Args:
        A: System matrix
        b: Noisy data
        omega: Relaxation parameter
        rule: Stopping rule name
        maxits: Sweep limit
        sigma: Noise standard deviation, required by upre and cdp
        x_star: Ground truth, required by the oracle
        seed: Seed of the Gaussian trace probe
        meter: Work meter; the oracle is charged only up to its stop
        parallel: Run the probe sweep on a second thread

    Returns:
        RunResult with k_stop the 1-based sweep count of the returned iterate
    """
    check_omega(omega)
    check_system(A, b, x_star)
    if maxits < 1:
        raise ConfigError(f"maxits must be at least 1, got {maxits}")
    plugin = get_rule(rule)
    plugin.check_inputs(sigma, x_star is not None)

    meter = meter if meter is not None else WorkMeter.for_matrix(A)
    b = np.asarray(b, dtype=np.float64)
    m = A.n_rows
    x = np.zeros(A.n_cols)
    probe = make_probe(A, seed) if plugin.uses_trace else None

    state = RuleState(rule=plugin, sigma=sigma)
    history = History()
    units_after: List[float] = []
    ops_after: List[int] = []
    best_x = x.copy()
    reason = "maxits"

    with sweep_pool(parallel and probe is not None) as pool:
        for k in range(1, maxits + 1):
            if pool is not None:
                main = pool.submit(sweep_in_place, A, b, x, omega, Direction.DOWN, meter)
                trace_update(A, probe, omega, Direction.DOWN)
                main.result()
                meter.charge("trace_update").charge("inner_product")
                meter.record_ops(probe.last_ops)
            else:
                sweep_in_place(A, b, x, omega, Direction.DOWN, meter)
                if probe is not None:
                    trace_update(A, probe, omega, Direction.DOWN, meter)

            residual_norm_sq, residual_ops = _residual_sq(A, b, x)
            if plugin.uses_residual:
                meter.charge("residual")
                meter.record_ops(residual_ops)

            history.residual_norm.append(math.sqrt(residual_norm_sq))
            error = relative_error(x, x_star) if x_star is not None else None
            if error is not None:
                history.true_error.append(error)

            stats = IterationStats(k=k, residual_norm_sq=residual_norm_sq,
                                   trace=probe.t if probe is not None else 0.0,
                                   m=m, sigma=sigma, true_error=error)
            triggered = state.observe(stats)
            if probe is not None:
                history.trace.append(probe.t)
            score = state.scores[-1]
            history.score.append(math.nan if score is None else score)
            units_after.append(meter.work_units)
            ops_after.append(meter.ops)

            if state.best_index == k:
                best_x = x.copy()
            if triggered:
                reason = "triggered"
                break

    if plugin.selection == "argmin" and state.best_index is not None:
        k_stop, x_out, reason = state.best_index, best_x, "argmin"
    else:
        k_stop, x_out = len(history.residual_norm), x
    stopped_at = None if plugin.selection == "first" and reason != "triggered" else k_stop

    if state.skipped:
        logger.warning("%s: %d sweeps had an undefined score and were excluded", plugin.name, state.skipped)

    work_units, measured = meter.work_units, meter.measured_units
    if plugin.requires_truth:
        # consulting the oracle is free; sweeps past its stop are not charged
        work_units -= units_after[-1] - units_after[k_stop - 1]
        measured -= (ops_after[-1] - ops_after[k_stop - 1]) / meter.unit_ops

    result = RunResult(
        rule=plugin.name,
        x=x_out,
        k_stop=k_stop,
        sweeps_executed=len(history.residual_norm),
        history=history,
        work_units=work_units,
        measured_units=measured,
        stop_reason=reason,
        relative_error=relative_error(x_out, x_star) if x_star is not None else None,
        stopped_at=stopped_at,
    )
    logger.info("kaczmarz+%s: stop %s at sweep %d of %d, %.2f work units",
                plugin.name, reason, k_stop, result.sweeps_executed, work_units)
    return result


def _residual_sq(A: SparseMatrix, b: np.ndarray, x: np.ndarray) -> Tuple[float, int]:
    """||b - A x||^2 and the floating-point operations it took"""
    r = b - A.matvec(x)
    # multiply-add per nonzero, then the subtraction and the squared sum over r
    return float(np.dot(r, r)), 2 * A.nnz + 3 * r.size


def kaczmarz_trajectory(A: SparseMatrix, b: np.ndarray, omega: float, maxits: int,
                        sigma: Optional[float] = None, x_star: Optional[np.ndarray] = None,
                        seed: Optional[int] = 0) -> List[IterationStats]:
    """
    Per-sweep statistics of one down-sweep run with a single trace probe

    Every rule can then be folded over the same list, so rules are
    compared on identical iterates and identical trace estimates.
    """
    check_omega(omega)
    check_system(A, b, x_star)
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros(A.n_cols)
    probe = make_probe(A, seed)

    trajectory = []
    for k in range(1, maxits + 1):
        sweep_in_place(A, b, x, omega, Direction.DOWN)
        trace_update(A, probe, omega, Direction.DOWN)
        trajectory.append(IterationStats(
            k=k,
            residual_norm_sq=_residual_sq(A, b, x)[0],
            trace=probe.t,
            m=A.n_rows,
            sigma=sigma,
            true_error=relative_error(x, x_star) if x_star is not None else None,
        ))
    return trajectory


def select_stop(rule: Union[str, StoppingRulePlugin], trajectory: List[IterationStats]) -> RuleState:
    """Fold a rule over a recorded trajectory; the state holds stop and scores"""
    plugin = get_rule(rule) if isinstance(rule, str) else rule
    if trajectory:
        plugin.check_inputs(trajectory[0].sigma, trajectory[0].true_error is not None)
    state = RuleState(rule=plugin, sigma=trajectory[0].sigma if trajectory else None)
    for stats in trajectory:
        if state.observe(stats):
            break
    if plugin.selection == "argmin":
        state.stopped_at = state.best_index
    return state
