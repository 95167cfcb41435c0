"""
Spectral Lab - dense L, G and eigen-data for validating the sweep algebra on small systems
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import eig, solve_triangular

from core.kaczmarz import Direction, check_omega, sweep_in_place
from core.sparse import SparseMatrix, from_dense
from utils.errors import (ConfigError, DegenerateComponent, DegenerateRowError, MultipleLeadingEigenvalue,
                          TooLargeError)
from utils.helpers import make_rng, save_to_json

logger = logging.getLogger(__name__)

MAX_ENTRIES = 10 ** 6
GAP_TOL = 1e-10
MAX_POLY_DEGREE = 50


@dataclass
class DenseLab:
    """
    Dense operators of one down-sweep: L = tril(A A^T, -1) + D / omega, G = I - A^T L^-1 A

    L^-1 is only ever applied through triangular solves.
    """
    A: SparseMatrix
    A_dense: np.ndarray
    L: np.ndarray
    G: np.ndarray
    omega: float

    @property
    def n(self) -> int:
        return self.G.shape[0]

    def apply_Linv(self, v: np.ndarray) -> np.ndarray:
        return solve_triangular(self.L, v, lower=True)

    def sweep(self, x: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Closed form of one down-sweep: x + A^T L^-1 (b - A x)"""
        return x + self.A_dense.T @ self.apply_Linv(b - self.A_dense @ x)

    def consistency_deviation(self) -> float:
        """max |A^T L^-1 A + G - I|"""
        lhs = self.A_dense.T @ self.apply_Linv(self.A_dense) + self.G
        return float(np.max(np.abs(lhs - np.eye(self.n))))


def build_lab(A: SparseMatrix, omega: float = 1.0) -> DenseLab:
    """
    Raises:
        TooLargeError: m * n above MAX_ENTRIES
        DegenerateRowError: A has a zero row
    """
    check_omega(omega)
    if A.n_rows * A.n_cols > MAX_ENTRIES:
        raise TooLargeError(f"dense lab refused for {A.n_rows}x{A.n_cols} (limit {MAX_ENTRIES} entries)")
    zero_rows = np.flatnonzero(A.row_norms_sq == 0)
    if len(zero_rows):
        raise DegenerateRowError(f"row {zero_rows[0]} is zero; diag(A A^T) is singular")

    A_dense = A.to_dense()
    AAt = A_dense @ A_dense.T
    L = np.tril(AAt, -1) + np.diag(np.diag(AAt)) / omega
    G = np.eye(A.n_cols) - A_dense.T @ solve_triangular(L, A_dense, lower=True)
    return DenseLab(A=A, A_dense=A_dense, L=L, G=G, omega=omega)


def verify_upsweep_transpose(A: SparseMatrix, omega: float = 1.0) -> float:
    """max |G_up - G^T|, G_up built from the row-reversed matrix"""
    G = build_lab(A, omega).G
    G_up = build_lab(A.row_reversed(), omega).G
    return float(np.max(np.abs(G_up - G.T)))


@dataclass
class EigenReport:
    eigenvalues: List[complex]
    rho: float
    kappa_1: Optional[float]
    v1: np.ndarray
    v1_left: np.ndarray
    simple: bool = True
    omega: Optional[float] = None
    shape: Tuple[int, int] = field(default=(0, 0))

    def to_dict(self) -> Dict:
        return {
            'shape': [int(v) for v in self.shape],
            'omega': None if self.omega is None else float(self.omega),
            'rho': float(self.rho),
            'kappa_1': None if self.kappa_1 is None else float(self.kappa_1),
            'simple_leading': bool(self.simple),
            'eigenvalues': [[z.real, z.imag] for z in self.eigenvalues],
        }

    def write_json(self, path: Union[str, Path]) -> Path:
        return save_to_json(path, self.to_dict())


def eigen_report(lab: DenseLab, strict: bool = False) -> EigenReport:
    """
    Full eigendecomposition of G, sorted by modulus (descending)

    kappa_1 = 1 / |u1^H v1| with unit left and right eigenvectors of the
    leading eigenvalue. When the two largest moduli differ by less than
    GAP_TOL the leading eigenvalue is not simple: kappa_1 is None, or
    MultipleLeadingEigenvalue is raised when ``strict``.
    """
    values, left, right = eig(lab.G, left=True, right=True)
    order = np.argsort(-np.abs(values), kind="stable")
    values, left, right = values[order], left[:, order], right[:, order]

    moduli = np.abs(values)
    simple = bool(len(values) < 2 or moduli[0] - moduli[1] >= GAP_TOL)
    v1 = right[:, 0] / np.linalg.norm(right[:, 0])
    u1 = left[:, 0] / np.linalg.norm(left[:, 0])

    kappa_1 = None
    if simple:
        kappa_1 = float(1.0 / abs(np.vdot(u1, v1)))
    elif strict:
        raise MultipleLeadingEigenvalue(f"|lambda_1| - |lambda_2| = {moduli[0] - moduli[1]:.3e} < {GAP_TOL}")
    else:
        logger.debug("leading eigenvalue not simple (gap %.3e); kappa_1 omitted", moduli[0] - moduli[1])

    return EigenReport(eigenvalues=[complex(z) for z in values], rho=float(moduli[0]), kappa_1=kappa_1,
                       v1=v1, v1_left=u1, simple=simple, omega=lab.omega, shape=lab.A.shape)


def polynomial_check(lab: DenseLab, b: np.ndarray, x0: Optional[np.ndarray], k: int) -> Tuple[float, float]:
    """
    Compare k real sweeps with the iteration polynomials of G

    dev_q = ||x_k - x0 - sum_{i<k} G^i r0||, dev_p = ||r_k - G^k r0||, where
    r_j = A^T L^-1 (b - A x_j), accumulated with repeated products by dense G.
    """
    if not 0 <= k <= MAX_POLY_DEGREE:
        raise ConfigError(f"polynomial degree must lie in [0, {MAX_POLY_DEGREE}], got {k}")
    b = np.asarray(b, dtype=np.float64)
    x0 = np.zeros(lab.n) if x0 is None else np.asarray(x0, dtype=np.float64)

    def r(x):
        return lab.A_dense.T @ lab.apply_Linv(b - lab.A_dense @ x)

    x_k = x0.copy()
    for _ in range(k):
        sweep_in_place(lab.A, b, x_k, lab.omega, Direction.DOWN)

    r0 = r(x0)
    q_sum = np.zeros(lab.n)
    power = r0.copy()
    for _ in range(k):
        q_sum += power
        power = lab.G @ power

    dev_q = float(np.linalg.norm(x_k - x0 - q_sum))
    dev_p = float(np.linalg.norm(r(x_k) - power))
    return dev_q, dev_p


def neumann_deviation(lab: DenseLab, K: int) -> float:
    """||(I + G + ... + G^K)(I - G) - I||_2"""
    eye = np.eye(lab.n)
    partial = eye.copy()
    for _ in range(K):
        partial = eye + lab.G @ partial
    return float(np.linalg.norm(partial @ (eye - lab.G) - eye, 2))


def proportionality_constant(lab: DenseLab, x_star: np.ndarray, x0: Optional[np.ndarray] = None,
                             report: Optional[EigenReport] = None) -> float:
    """
    Limit of (gauge / true error)^2 for a consistent run from x0

    The down-sweep error follows G, the up-sweep error G^T. With the
    leading right/left eigenvectors v1, u1 of G the twin's leading
    eigenvector is conj(u1), and the limit is
    ||d1 v1 - d1~ v1~||^2 / |d1|^2 with d1, d1~ the leading coordinates
    of the initial error in the two eigenbases.

    Raises:
        MultipleLeadingEigenvalue: lambda_1 not simple (hence not real)
        DegenerateComponent: the initial error has no lambda_1 component
    """
    report = eigen_report(lab) if report is None else report
    lam = report.eigenvalues[0]
    if not report.simple or abs(lam.imag) > GAP_TOL * max(1.0, abs(lam)):
        raise MultipleLeadingEigenvalue("proportionality needs a simple real leading eigenvalue")

    x0 = np.zeros(lab.n) if x0 is None else np.asarray(x0, dtype=np.float64)
    e0 = x0 - np.asarray(x_star, dtype=np.float64)

    v1, u1 = report.v1, report.v1_left
    v1_twin = np.conj(u1)
    d1 = np.vdot(u1, e0) / np.vdot(u1, v1)
    d1_twin = np.dot(v1, e0) / np.dot(v1, v1_twin)

    if abs(d1) <= 1e-12 * max(np.linalg.norm(e0), 1e-300):
        raise DegenerateComponent("initial error has no component along the leading eigenvector")

    return float(np.linalg.norm(d1 * v1 - d1_twin * v1_twin) ** 2 / abs(d1) ** 2)


def random_matrix(rng: np.random.Generator, m: int, n: int, symmetric: bool = False) -> SparseMatrix:
    """Dense Gaussian test matrix; full column rank with probability one when m >= n"""
    dense = rng.standard_normal((m, n))
    if symmetric:
        if m != n:
            raise ConfigError("a symmetric test matrix must be square")
        dense = 0.5 * (dense + dense.T)
    return from_dense(dense)


def parse_sizes(spec: str) -> List[Tuple[int, int]]:
    """'8x6,12x10' -> [(8, 6), (12, 10)]"""
    sizes = []
    for item in spec.split(","):
        try:
            m, n = (int(v) for v in item.lower().split("x"))
        except ValueError:
            raise ConfigError(f"invalid size '{item}'; expected MxN")
        if m < 1 or n < 1:
            raise ConfigError(f"invalid size '{item}'")
        sizes.append((m, n))
    return sizes


def spectral_suite(sizes: Sequence[Tuple[int, int]], omegas: Sequence[float], trials: int, seed: int = 0,
                   include_identity: bool = False, poly_degree: int = 20) -> Dict:
    """
    Run the dense checks over random instances

    Every trial draws one matrix per size and checks it for every omega:
    transpose identity (<= 1e-11), rho < 1, polynomial deviations (<= 1e-8).

    Returns:
        JSON-ready report with one entry per (instance, omega) and a
        ``passed`` flag
    """
    rng = make_rng(seed)
    instances: List[Tuple[str, SparseMatrix]] = []
    if include_identity:
        instances.append(("identity", from_dense(np.eye(4))))
    for trial in range(trials):
        for m, n in sizes:
            instances.append((f"random-{trial}", random_matrix(rng, m, n)))

    entries = []
    for label, A in instances:
        b = rng.standard_normal(A.n_rows)
        for omega in omegas:
            lab = build_lab(A, omega)
            report = eigen_report(lab)
            dev_q, dev_p = polynomial_check(lab, b, None, poly_degree)
            deviation = verify_upsweep_transpose(A, omega)
            # G has eigenvalue 1 on the null space of a wide matrix
            rho_ok = report.rho < 1.0 or A.n_rows < A.n_cols
            ok = deviation <= 1e-11 and rho_ok and dev_q <= 1e-8 and dev_p <= 1e-8
            entries.append({
                'instance': label,
                'shape': [A.n_rows, A.n_cols],
                'omega': omega,
                'transpose_deviation': deviation,
                'rho': report.rho,
                'kappa_1': report.kappa_1,
                'dev_q': dev_q,
                'dev_p': dev_p,
                'passed': bool(ok),
            })
            if not ok:
                logger.warning("spectral check failed: %s %s omega=%.2f", label, A.shape, omega)

    return {
        'seed': seed,
        'trials': trials,
        'omegas': list(omegas),
        'entries': entries,
        'violations': sum(not e['passed'] for e in entries),
        'passed': all(e['passed'] for e in entries),
    }
