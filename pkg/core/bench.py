"""
Benchmark Harness - method dispatch, concurrent benchmark runs, scoring and studies
"""

import asyncio
import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeRemainingColumn

from core.gauge import MutualStepConfig, TwinConfig, mutual_step, twin_algorithm
from core.kaczmarz import run as kaczmarz_run
from core.phantoms import PHANTOM_KINDS, Phantom, make_phantom
from core.sparse import SparseMatrix
from core.spectral import parse_sizes, spectral_suite
from core.stat_rules import kaczmarz_trajectory, load_rules, run_with_rule, select_stop
from core.tomo import Geometry, TomoProblem, build_matrix, estimate_sigma, image_from_vector, make_problem
from core.workmeter import WorkMeter
from utils.errors import ConfigError, TwinGaugeError
from utils.helpers import append_jsonl, parse_angles, save_to_json, write_csv, write_pgm

console = Console()
logger = logging.getLogger(__name__)

METHODS = ("twin", "msa", "kaczmarz")
DEFAULT_BENCH_METHODS = ("twin", "msa", "kaczmarz+oracle")
POINTS = (1.0, 0.5)
HISTOGRAM_BINS = 20


def parse_method(name: str) -> Tuple[str, Optional[str]]:
    """'kaczmarz+oracle' -> ('kaczmarz', 'oracle'); 'msa' -> ('msa', None)"""
    method, _, rule = name.partition("+")
    if method not in METHODS:
        raise ConfigError(f"unknown method '{method}'; choose from {', '.join(METHODS)}")
    if rule and method != "kaczmarz":
        raise ConfigError(f"a stopping rule only applies to kaczmarz, got '{name}'")
    if method == "kaczmarz":
        rule = rule or "none"
        if rule not in load_rules():
            raise ConfigError(f"unknown stopping rule '{rule}'")
    return method, rule or None


@dataclass
class MethodOutcome:
    """Uniform view of a twin, msa or kaczmarz+rule run"""
    method: str
    rule: Optional[str]
    x: np.ndarray
    k_stop: int
    relative_error: Optional[float]
    work_units: float
    measured_units: float
    stop_reason: str
    result: object = None

    @property
    def label(self) -> str:
        return f"{self.method}+{self.rule}" if self.rule else self.method

    def to_dict(self) -> Dict:
        summary = self.result.to_dict() if self.result is not None else {}
        summary.update({
            'method': self.label,
            'k_stop': self.k_stop,
            'relative_error': self.relative_error,
            'work_units': self.work_units,
            'measured_work_units': self.measured_units,
            'stop_reason': self.stop_reason,
        })
        return summary

    def write_history(self, path: Union[str, Path]) -> Path:
        return self.result.write_csv(path)


def solve(problem: TomoProblem, method: str, rule: Optional[str] = None, omega: float = 1.0, maxits: int = 300,
          tol: float = 1e-4, slack: int = 10, seed: Optional[int] = 0, parallel: bool = False) -> MethodOutcome:
    """
    Run one reconstruction method on a problem with known ground truth

    Args:
        problem: Matrix, data and ground truth
        method: twin, msa or kaczmarz (a ``kaczmarz+rule`` name is also accepted)
        rule: Stopping rule for kaczmarz, ``none`` by default
        seed: Seed of the trace probe (kaczmarz rules only)
        parallel: Run paired sweeps on two threads
    """
    if "+" in method:
        method, rule = parse_method(method)
    A, b, x_star = problem.A, problem.b, problem.x_star
    meter = WorkMeter.for_matrix(A)

    if method == "twin":
        res = twin_algorithm(A, b, TwinConfig(omega=omega, maxits=maxits, slack=slack, parallel=parallel),
                             x_star=x_star, meter=meter)
        x = res.x_out
    elif method == "msa":
        res = mutual_step(A, b, MutualStepConfig(omega=omega, maxits=maxits, tol=tol, parallel=parallel),
                          x_star=x_star, meter=meter)
        x = res.x_out
    elif method == "kaczmarz":
        rule = rule or "none"
        res = run_with_rule(A, b, omega=omega, rule=rule, maxits=maxits, sigma=problem.sigma,
                            x_star=x_star, seed=seed, meter=meter, parallel=parallel)
        x = res.x
    else:
        raise ConfigError(f"unknown method '{method}'")

    return MethodOutcome(method=method, rule=rule if method == "kaczmarz" else None, x=x, k_stop=res.k_stop,
                         relative_error=res.relative_error, work_units=res.work_units,
                         measured_units=res.measured_units, stop_reason=res.stop_reason, result=res)


@dataclass
class BenchSpec:
    """Benchmark configuration; run i uses noise and probe seed seed0 + i"""
    kinds: List[str] = field(default_factory=lambda: ["grains"])
    size: int = 128
    angles: str = "0:1.5:178.5"
    n_rays: int = 181
    eta: float = 8e-3
    omega: float = 1.0
    runs: int = 100
    seed0: int = 0
    methods: Sequence[str] = DEFAULT_BENCH_METHODS
    maxits: int = 300
    tol: float = 1e-4
    slack: int = 10

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError(f"runs must be at least 1, got {self.runs}")
        if not self.kinds:
            raise ConfigError("at least one phantom kind is required")
        for kind in self.kinds:
            if kind not in PHANTOM_KINDS:
                raise ConfigError(f"unknown phantom kind '{kind}'")
        # the points of one instance total 1.5 only when two methods compete
        if len(self.methods) < len(POINTS):
            raise ConfigError(f"at least {len(POINTS)} methods are required, got {len(self.methods)}")
        self.methods = tuple(self.methods)
        for name in self.methods:
            parse_method(name)
        if self.eta < 0:
            raise ConfigError(f"eta must be non-negative, got {self.eta}")

    def geometry(self) -> Geometry:
        return Geometry(image_size=self.size, angles=tuple(parse_angles(self.angles)), n_rays=self.n_rays)

    def to_dict(self) -> Dict:
        return {
            'kinds': list(self.kinds),
            'size': self.size,
            'angles': self.angles,
            'n_rays': self.n_rays,
            'eta': self.eta,
            'omega': self.omega,
            'runs': self.runs,
            'seed0': self.seed0,
            'methods': list(self.methods),
            'maxits': self.maxits,
            'tol': self.tol,
            'slack': self.slack,
        }


@dataclass
class RunRecord:
    """One method on one benchmark instance"""
    kind: str
    run: int
    noise_seed: int
    method: str
    status: str
    relative_error: Optional[float] = None
    work_units: Optional[float] = None
    k_stop: Optional[int] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> Dict:
        return {
            'kind': self.kind,
            'run': self.run,
            'noise_seed': self.noise_seed,
            'method': self.method,
            'status': self.status,
            'relative_error': self.relative_error,
            'work_units': self.work_units,
            'k_stop': self.k_stop,
            'message': self.message,
        }


def award_points(errors: Sequence[float]) -> List[float]:
    """1 point to the smallest error, half a point to the second, none to the rest"""
    order = sorted(range(len(errors)), key=lambda i: errors[i])
    points = [0.0] * len(errors)
    for rank, i in enumerate(order[:len(POINTS)]):
        points[i] = POINTS[rank]
    return points


@dataclass
class ScoreRow:
    kind: str
    method: str
    mean_error: float
    mean_work_units: float
    score: float
    completed: int
    failed: int

    def to_dict(self) -> Dict:
        return {
            'kind': self.kind,
            'method': self.method,
            'mean_error': self.mean_error,
            'mean_work_units': self.mean_work_units,
            'score': self.score,
            'completed': self.completed,
            'failed': self.failed,
        }


@dataclass
class ScoreTable:
    """
    Per phantom and method: mean relative error, mean work units, score

    A run counts as completed only if every method finished; failed runs
    are kept in ``records`` but excluded from means and scores.
    """
    spec: BenchSpec
    rows: List[ScoreRow]
    records: List[RunRecord]
    points: Dict[Tuple[str, int, str], float] = field(default_factory=dict)

    def row(self, kind: str, method: str) -> ScoreRow:
        for row in self.rows:
            if row.kind == kind and row.method == method:
                return row
        raise KeyError((kind, method))

    def write_csv(self, path: Union[str, Path]) -> Path:
        header = ["kind", "method", "mean_error", "mean_work_units", "score", "completed", "failed"]
        return write_csv(path, header, ([r.kind, r.method, r.mean_error, r.mean_work_units, r.score,
                                         r.completed, r.failed] for r in self.rows))

    def to_dict(self) -> Dict:
        return {
            'spec': self.spec.to_dict(),
            'rows': [r.to_dict() for r in self.rows],
            'failed_records': sum(not r.ok for r in self.records),
        }


def build_score_table(spec: BenchSpec, records: Sequence[RunRecord]) -> ScoreTable:
    """Deterministic fold over records sorted by (kind, run, method order)"""
    method_order = {m: i for i, m in enumerate(spec.methods)}
    kind_order = {k: i for i, k in enumerate(spec.kinds)}
    records = sorted(records, key=lambda r: (kind_order[r.kind], r.run, method_order[r.method]))

    by_run: Dict[Tuple[str, int], List[RunRecord]] = defaultdict(list)
    for record in records:
        by_run[(record.kind, record.run)].append(record)

    points: Dict[Tuple[str, int, str], float] = {}
    errors: Dict[Tuple[str, str], List[float]] = defaultdict(list)
    work: Dict[Tuple[str, str], List[float]] = defaultdict(list)
    failed: Dict[str, int] = defaultdict(int)

    for (kind, run), group in by_run.items():
        if len(group) != len(spec.methods) or not all(r.ok for r in group):
            failed[kind] += 1
            continue
        for record, p in zip(group, award_points([r.relative_error for r in group])):
            points[(kind, run, record.method)] = p
            errors[(kind, record.method)].append(record.relative_error)
            work[(kind, record.method)].append(record.work_units)

    rows = []
    for kind in spec.kinds:
        for method in spec.methods:
            errs = errors[(kind, method)]
            rows.append(ScoreRow(
                kind=kind,
                method=method,
                mean_error=float(np.mean(errs)) if errs else math.nan,
                mean_work_units=float(np.mean(work[(kind, method)])) if errs else math.nan,
                score=float(sum(p for (k, _, m), p in points.items() if k == kind and m == method)),
                completed=len(errs),
                failed=failed[kind],
            ))
    return ScoreTable(spec=spec, rows=rows, records=list(records), points=points)


def histogram_rows(records: Sequence[RunRecord], kinds: Sequence[str], methods: Sequence[str],
                   bins: int = HISTOGRAM_BINS) -> List[List]:
    """Error histograms with bin edges shared by all methods of a phantom"""
    rows = []
    for kind in kinds:
        per_method = {m: [r.relative_error for r in records if r.kind == kind and r.method == m and r.ok]
                      for m in methods}
        pooled = [e for errs in per_method.values() for e in errs]
        if not pooled:
            continue
        lo, hi = min(pooled), max(pooled)
        if hi <= lo:
            hi = lo + 1e-12
        edges = np.linspace(lo, hi, bins + 1)
        counts = {m: np.histogram(errs, bins=edges)[0] for m, errs in per_method.items()}
        for i in range(bins):
            rows.append([kind, edges[i], edges[i + 1]] + [int(counts[m][i]) for m in methods])
    return rows


class BenchRunner:
    """Run every method on seeded instances of each phantom, several at a time"""

    def __init__(self, spec: BenchSpec, output_dir: Union[str, Path] = "bench", max_concurrent: int = 4):
        """
        Initialize benchmark runner

        Args:
            spec: Benchmark configuration
            output_dir: Directory for runs.jsonl, scores.csv, scores.json and histogram.csv
            max_concurrent: Number of instances solved at the same time
        """
        self.spec = spec
        self.output_dir = Path(output_dir)
        self.max_concurrent = max(1, max_concurrent)
        self.records: List[RunRecord] = []
        self.geometry = spec.geometry()
        self.A: Optional[SparseMatrix] = None
        self.phantoms: Dict[str, Phantom] = {}

    @property
    def jsonl_path(self) -> Path:
        return self.output_dir / "runs.jsonl"

    def _run_instance(self, kind: str, run: int) -> List[RunRecord]:
        """Solve one noisy instance with every method (runs in a worker thread)"""
        seed = self.spec.seed0 + run
        try:
            problem = make_problem(self.geometry, self.phantoms[kind], self.spec.eta, noise_seed=seed, A=self.A)
        except (TwinGaugeError, ArithmeticError, np.linalg.LinAlgError) as e:
            return [RunRecord(kind, run, seed, m, "failed", message=str(e)) for m in self.spec.methods]

        records = []
        for name in self.spec.methods:
            try:
                outcome = solve(problem, name, omega=self.spec.omega, maxits=self.spec.maxits,
                                tol=self.spec.tol, slack=self.spec.slack, seed=seed)
                records.append(RunRecord(kind, run, seed, name, "ok", outcome.relative_error,
                                         outcome.work_units, outcome.k_stop))
            except (TwinGaugeError, ArithmeticError, np.linalg.LinAlgError) as e:
                logger.warning("%s run %d, %s failed: %s", kind, run, name, e)
                records.append(RunRecord(kind, run, seed, name, "failed", message=str(e)))
        return records

    async def _run_task(self, kind: str, run: int) -> List[RunRecord]:
        return await asyncio.to_thread(self._run_instance, kind, run)

    async def run_all(self) -> ScoreTable:
        """
        Run all instances and aggregate

        Returns:
            ScoreTable over completed runs
        """
        self.output_dir.mkdir(parents=True, exist_ok=True)
        if self.jsonl_path.exists():
            self.jsonl_path.unlink()

        console.print(f"\n[bold cyan]Building system matrix for N={self.spec.size}, "
                      f"{len(self.geometry.angles)} angles x {self.spec.n_rays} rays...[/bold cyan]")
        self.A = build_matrix(self.geometry)
        for kind in self.spec.kinds:
            self.phantoms[kind] = make_phantom(kind, self.spec.size, self.spec.seed0)

        instances = [(kind, run) for kind in self.spec.kinds for run in range(self.spec.runs)]
        console.print(f"[bold cyan]Running {len(instances)} instances x {len(self.spec.methods)} methods...[/bold cyan]\n")

        with Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
            TextColumn("({task.completed}/{task.total})"),
            TimeRemainingColumn(),
            console=console,
        ) as progress:
            task = progress.add_task("[cyan]Benchmarking...", total=len(instances))

            # batches keep the JSONL in (kind, run) order
            batch_size = self.max_concurrent
            for i in range(0, len(instances), batch_size):
                batch = instances[i:i + batch_size]
                results = await asyncio.gather(*(self._run_task(kind, run) for kind, run in batch))

                for records in results:
                    for record in records:
                        self.records.append(record)
                        append_jsonl(self.jsonl_path, record.to_dict())

                progress.update(task, advance=len(batch))

        table = build_score_table(self.spec, self.records)
        failed = sum(not r.ok for r in self.records)

        console.print(f"\n[bold green]✓ Completed {len(self.records) - failed} method runs[/bold green]")
        if failed > 0:
            console.print(f"[yellow]⚠ Failed method runs: {failed}[/yellow]\n")

        return table

    def write_outputs(self, table: ScoreTable) -> Dict[str, Path]:
        paths = {
            'scores_csv': table.write_csv(self.output_dir / "scores.csv"),
            'scores_json': save_to_json(self.output_dir / "scores.json", table.to_dict()),
            'histogram': write_csv(self.output_dir / "histogram.csv",
                                   ["kind", "bin_lo", "bin_hi"] + list(self.spec.methods),
                                   histogram_rows(self.records, self.spec.kinds, self.spec.methods)),
            'runs': self.jsonl_path,
        }
        return paths


@dataclass
class NoiseStudy:
    """Relative error histories of plain Kaczmarz for several noise levels"""
    etas: List[float]
    errors: Dict[float, List[float]]

    def minima(self) -> Dict[float, Tuple[int, float]]:
        """eta -> (1-based sweep of the minimum, minimal error)"""
        return {eta: (int(np.argmin(e)) + 1, float(np.min(e))) for eta, e in self.errors.items()}

    def write_csv(self, path: Union[str, Path]) -> Path:
        n = max(len(e) for e in self.errors.values())
        header = ["k"] + [f"eta_{eta:g}" for eta in self.etas]
        rows = [[k + 1] + [self.errors[eta][k] for eta in self.etas] for k in range(n)]
        return write_csv(path, header, rows)


def noise_study(geometry: Geometry, phantom: Phantom, etas: Sequence[float], omega: float = 1.0,
                maxits: int = 100, seed: int = 0, A: Optional[SparseMatrix] = None) -> NoiseStudy:
    """Same phantom and matrix, one noise draw per level (all with the same seed)"""
    if not etas:
        raise ConfigError("at least one noise level is required")
    A = build_matrix(geometry) if A is None else A
    errors = {}
    for eta in etas:
        problem = make_problem(geometry, phantom, eta, noise_seed=seed, A=A)
        _, history = kaczmarz_run(A, problem.b, omega=omega, n_sweeps=maxits, x_star=problem.x_star)
        errors[eta] = history.true_error
        logger.info("noise study eta=%g: minimum error %.4f at sweep %d",
                    eta, min(history.true_error), int(np.argmin(history.true_error)) + 1)
    return NoiseStudy(etas=list(etas), errors=errors)


COMPARED_RULES = ("upre", "gcv", "cdp", "oracle")


@dataclass
class ComparisonResult:
    """Statistical rules and the Twin Algorithm on one noisy instance"""
    true_error: List[float]
    residual_norm: List[float]
    trace: List[float]
    scores: Dict[str, List[Optional[float]]]
    stops: Dict[str, Optional[int]]
    stop_errors: Dict[str, Optional[float]]
    twin_gauge: List[float]
    twin_error: List[float]

    def to_dict(self) -> Dict:
        return {
            'stops': self.stops,
            'relative_errors': self.stop_errors,
            'oracle_minimum': min(self.true_error),
        }

    def write_csv(self, path: Union[str, Path]) -> Path:
        header = ["k", "true_error", "residual_norm", "t_k"] + list(COMPARED_RULES[:3]) + \
                 ["twin_gauge_scaled", "twin_true_error"]
        rows = []
        for i in range(len(self.true_error)):
            row = [i + 1, self.true_error[i], self.residual_norm[i], self.trace[i]]
            row += [self.scores[r][i] if i < len(self.scores[r]) else None for r in COMPARED_RULES[:3]]
            row += [self.twin_gauge[i] if i < len(self.twin_gauge) else None,
                    self.twin_error[i] if i < len(self.twin_error) else None]
            rows.append(row)
        return write_csv(path, header, rows)


def compare_rules(problem: TomoProblem, omega: float = 1.0, maxits: int = 300, slack: int = 10,
                  seed: int = 0) -> ComparisonResult:
    """
    Evaluate UPRE, GCV, CDP and the oracle on one shared Kaczmarz trajectory

    The Twin Algorithm runs alongside with the same sweep budget; its gauge
    is divided by ||x*|| so it reads on the relative-error scale.
    """
    trajectory = kaczmarz_trajectory(problem.A, problem.b, omega, maxits, sigma=problem.sigma,
                                     x_star=problem.x_star, seed=seed)
    true_error = [s.true_error for s in trajectory]

    scores, stops, stop_errors = {}, {}, {}
    for rule in COMPARED_RULES:
        state = select_stop(rule, trajectory)
        scores[rule] = state.scores
        stops[rule] = state.stopped_at
        stop_errors[rule] = true_error[state.stopped_at - 1] if state.stopped_at else None

    twin = twin_algorithm(problem.A, problem.b, TwinConfig(omega=omega, maxits=maxits, slack=slack),
                          x_star=problem.x_star)
    scale = float(np.linalg.norm(problem.x_star)) or 1.0
    stops["twin"] = twin.k_stop
    stop_errors["twin"] = twin.relative_error

    return ComparisonResult(
        true_error=true_error,
        residual_norm=[math.sqrt(s.residual_norm_sq) for s in trajectory],
        trace=[s.trace for s in trajectory],
        scores=scores,
        stops=stops,
        stop_errors=stop_errors,
        twin_gauge=[g / scale for g in twin.gauge_history],
        twin_error=twin.history.true_error,
    )


def cmd_phantom(kind: str, N: int, seed: int, out_path: Union[str, Path], binary: bool = True) -> Path:
    """Write a phantom as PGM"""
    phantom = make_phantom(kind, N, seed)
    return write_pgm(out_path, phantom.pixels, binary=binary)


def cmd_run(geometry: Geometry, kind: str, method: str, rule: Optional[str] = None, omega: float = 1.0,
            eta: float = 8e-3, maxits: int = 300, tol: float = 1e-4, slack: int = 10, seed: int = 0,
            output_dir: Union[str, Path] = "run", parallel: bool = False, sigma: Optional[float] = None) -> Dict:
    """
    End to end: matrix, phantom, noise, one method, exports

    Writes summary.json, history.csv and reconstruction.pgm to output_dir.
    The phantom uses ``seed``; noise and probe use ``seed`` as well. ``sigma``
    replaces the true noise level handed to upre and cdp.

    Returns:
        The JSON summary
    """
    method, parsed_rule = parse_method(method if rule is None else f"{method}+{rule}")

    start = time.perf_counter()
    phantom = make_phantom(kind, geometry.image_size, seed)
    problem = make_problem(geometry, phantom, eta, noise_seed=seed)
    if sigma is not None:
        problem.sigma = sigma
    outcome = solve(problem, method, parsed_rule, omega=omega, maxits=maxits, tol=tol, slack=slack,
                    seed=seed, parallel=parallel)
    wall_time = time.perf_counter() - start

    output_dir = Path(output_dir)
    outcome.write_history(output_dir / "history.csv")
    write_pgm(output_dir / "reconstruction.pgm", image_from_vector(outcome.x, geometry.image_size))

    summary = outcome.to_dict()
    summary.update({
        'kind': kind,
        'size': geometry.image_size,
        'angles': len(geometry.angles),
        'n_rays': geometry.n_rays,
        'm': problem.A.n_rows,
        'n': problem.A.n_cols,
        'eta': eta,
        'sigma': problem.sigma,
        'sigma_estimate': estimate_sigma(problem.A, problem.b, outcome.x),
        'omega': omega,
        'seed': seed,
        'wall_time_s': wall_time,
    })
    save_to_json(output_dir / "summary.json", summary)
    return summary


async def cmd_bench(spec: BenchSpec, output_dir: Union[str, Path] = "bench",
                    max_concurrent: int = 4) -> ScoreTable:
    """
    Convenience function to run a benchmark and write its outputs

    Args:
        spec: Benchmark configuration
        output_dir: Output directory
        max_concurrent: Instances solved at the same time

    Returns:
        The ScoreTable
    """
    runner = BenchRunner(spec, output_dir, max_concurrent)
    table = await runner.run_all()
    runner.write_outputs(table)
    return table


def cmd_spectral(sizes: Union[str, Sequence[Tuple[int, int]]] = "8x6,12x10,20x15",
                 omegas: Sequence[float] = (0.25, 1.0, 1.75), trials: int = 5, seed: int = 0,
                 include_identity: bool = False, out_path: Optional[Union[str, Path]] = None) -> Dict:
    """Dense spectral checks; the report's ``passed`` flag drives the exit code"""
    if isinstance(sizes, str):
        sizes = parse_sizes(sizes)
    if trials < 0:
        raise ConfigError(f"trials must be non-negative, got {trials}")
    report = spectral_suite(sizes, omegas, trials, seed=seed, include_identity=include_identity)
    if out_path is not None:
        save_to_json(out_path, report)
    return report
