"""
Sparse Core - CSR system matrix with cached squared row norms
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from utils.errors import ShapeError

logger = logging.getLogger(__name__)

Triplet = Tuple[int, int, float]


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """
    Row-major (CSR) matrix A with ||a_j||^2 cached per row

    The arrays are made read-only at construction; instances can be shared
    between threads. Zero rows are allowed (a ray that misses the image).
    """
    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    row_norms_sq: np.ndarray = field(default=None)

    def __post_init__(self):
        row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)

        if row_ptr.shape != (self.n_rows + 1,):
            raise ShapeError(f"row_ptr must have length {self.n_rows + 1}, got {row_ptr.shape}")
        if row_ptr[0] != 0 or row_ptr[-1] != len(values) or len(col_idx) != len(values):
            raise ShapeError("row_ptr does not match the number of stored entries")
        if np.any(np.diff(row_ptr) < 0):
            raise ShapeError("row_ptr must be non-decreasing")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= self.n_cols):
            raise IndexError("column index out of range")

        row_norms_sq = self.row_norms_sq
        if row_norms_sq is None:
            row_of_entry = np.repeat(np.arange(self.n_rows), np.diff(row_ptr))
            row_norms_sq = np.bincount(row_of_entry, weights=values * values, minlength=self.n_rows)
        row_norms_sq = np.ascontiguousarray(row_norms_sq, dtype=np.float64)

        for arr in (row_ptr, col_idx, values, row_norms_sq):
            arr.flags.writeable = False

        # frozen dataclass: bypass __setattr__ for the normalised arrays
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_norms_sq", row_norms_sq)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def row_density(self) -> float:
        """Average number of stored entries per row"""
        return self.nnz / self.n_rows if self.n_rows else 0.0

    @cached_property
    def csr(self) -> sp.csr_matrix:
        """scipy view used for the matrix-level products"""
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def row(self, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """Column indices and values of row j"""
        if not 0 <= j < self.n_rows:
            raise IndexError(f"row {j} out of range for {self.n_rows} rows")
        lo, hi = self.row_ptr[j], self.row_ptr[j + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def row_dot(self, j: int, x: np.ndarray) -> float:
        """a_j^T x"""
        _check_length(x, self.n_cols, "x")
        cols, vals = self.row(j)
        return float(np.dot(vals, x[cols]))

    def row_axpy(self, j: int, s: float, x: np.ndarray) -> None:
        """x <- x + s * a_j, touching only the nonzeros of row j"""
        _check_length(x, self.n_cols, "x")
        cols, vals = self.row(j)
        x[cols] += s * vals

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """y = A x"""
        _check_length(x, self.n_cols, "x")
        return np.asarray(self.csr @ np.asarray(x, dtype=np.float64))

    def matvec_t(self, y: np.ndarray) -> np.ndarray:
        """x = A^T y"""
        _check_length(y, self.n_rows, "y")
        return np.asarray(self.csr.T @ np.asarray(y, dtype=np.float64))

    def to_triplets(self) -> List[Triplet]:
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_ptr))
        return [(int(r), int(c), float(v)) for r, c, v in zip(rows, self.col_idx, self.values)]

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def row_reversed(self) -> "SparseMatrix":
        """The same matrix with its rows in reverse order"""
        return from_scipy(self.csr[np.arange(self.n_rows)[::-1]])

    def write_matrix_market(self, path: Union[str, Path]) -> Path:
        """Write coordinate Matrix Market (1-based indices)"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        scipy.io.mmwrite(str(path), self.csr.tocoo(), field="real")
        # scipy may append the extension itself
        return path if path.exists() else path.with_suffix(".mtx")


def _check_length(v: np.ndarray, expected: int, name: str):
    if np.ndim(v) != 1 or len(v) != expected:
        raise ShapeError(f"{name} must be a vector of length {expected}, got shape {np.shape(v)}")


def from_scipy(matrix: sp.spmatrix) -> SparseMatrix:
    """Canonical SparseMatrix from any scipy sparse matrix"""
    csr = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
    csr.sum_duplicates()
    csr.eliminate_zeros()
    csr.sort_indices()
    return SparseMatrix(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)


def from_triplets(n_rows: int, n_cols: int, entries: Iterable[Triplet]) -> SparseMatrix:
    """
    Build canonical CSR from (row, col, value) triplets

    Duplicate positions are summed and entries that sum to zero dropped.

    Raises:
        IndexError: a row or column index outside the matrix
    """
    entries = list(entries)
    if entries:
        rows, cols, vals = (np.asarray(c) for c in zip(*entries))
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    return from_arrays(n_rows, n_cols, rows, cols, vals)


def from_arrays(n_rows: int, n_cols: int, rows: np.ndarray, cols: np.ndarray,
                vals: np.ndarray) -> SparseMatrix:
    """Array form of from_triplets"""
    rows = np.asarray(rows).astype(np.int64)
    cols = np.asarray(cols).astype(np.int64)
    vals = np.asarray(vals)
    if len(rows) and (rows.min() < 0 or rows.max() >= n_rows):
        raise IndexError(f"row index out of range for {n_rows} rows")
    if len(cols) and (cols.min() < 0 or cols.max() >= n_cols):
        raise IndexError(f"column index out of range for {n_cols} columns")

    coo = sp.coo_matrix((vals.astype(np.float64), (rows, cols)), shape=(n_rows, n_cols))
    return from_scipy(coo)


def from_dense(dense: np.ndarray) -> SparseMatrix:
    return from_scipy(sp.csr_matrix(np.asarray(dense, dtype=np.float64)))


def read_matrix_market(path: Union[str, Path]) -> SparseMatrix:
    logger.debug("reading Matrix Market file %s", path)
    return from_scipy(scipy.io.mmread(str(path)))


def row_dot(A: SparseMatrix, j: int, x: np.ndarray) -> float:
    return A.row_dot(j, x)


def row_axpy(A: SparseMatrix, j: int, s: float, x: np.ndarray) -> None:
    A.row_axpy(j, s, x)


def matvec(A: SparseMatrix, x: np.ndarray) -> np.ndarray:
    return A.matvec(x)


def matvec_t(A: SparseMatrix, y: np.ndarray) -> np.ndarray:
    return A.matvec_t(y)
