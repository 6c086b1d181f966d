"""Compressed sparse row storage, products, norms and test-matrix generators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable CSR matrix.

    Column indices must strictly increase within each row and every stored
    value must be finite. Use :meth:`from_coo` to build from unsorted or
    duplicated triples.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        ro = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        va = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.nrows < 0 or self.ncols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        if ro.shape != (self.nrows + 1,):
            raise ValueError(f"row_offsets must have length nrows+1={self.nrows + 1}")
        if ro[0] != 0 or np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must start at 0 and be non-decreasing")
        if ro[-1] != ci.size or ci.size != va.size:
            raise ValueError("row_offsets[-1], col_indices and values disagree on nnz")
        if ci.size and (ci.min() < 0 or ci.max() >= self.ncols):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(va)):
            raise ValueError("stored values must be finite")
        # strictly increasing columns inside each row
        if ci.size > 1:
            step = np.diff(ci)
            row_start = np.zeros(ci.size, dtype=bool)
            row_start[ro[1:-1][ro[1:-1] < ci.size]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ValueError("column indices must strictly increase within a row")
        for arr in (ro, ci, va):
            arr.flags.writeable = False
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", va)
        csr = sp.csr_matrix((va, ci, ro), shape=(self.nrows, self.ncols))
        object.__setattr__(self, "_csr", csr)

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals) -> "SparseMatrix":
        """Build from coordinate triples (0-based). Duplicates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("rows, cols and vals must have the same length")
        if rows.size and (rows.min() < 0 or rows.max() >= nrows
                          or cols.min() < 0 or cols.max() >= ncols):
            raise ValueError("coordinate out of range")
        key = rows * max(ncols, 1) + cols
        order = np.argsort(key, kind="stable")
        key = key[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(vals[order], start) if key.size else vals[:0]
        r = uniq // max(ncols, 1)
        c = uniq % max(ncols, 1)
        offsets = np.zeros(nrows + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=nrows), out=offsets[1:])
        return cls(nrows, ncols, offsets, c, summed)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        r, c = np.nonzero(dense)
        return cls.from_coo(dense.shape[0], dense.shape[1], r, c, dense[r, c])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return spmv(self, x)

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        t = self._csr.T.tocsr()
        t.sort_indices()
        return SparseMatrix(self.ncols, self.nrows, t.indptr, t.indices, t.data)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self._csr.sum(axis=1)).ravel()


@dataclass(frozen=True)
class MatrixInfo:
    frobenius_norm: float
    two_norm_estimate: float
    two_norm_converged: bool
    nnz: int
    dims: tuple[int, int]
    # sqrt(||A||_1 ||A||_inf), a cheap upper bound on ||A||_2
    two_norm_bound: float = float("nan")


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """Return ``A @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.ncols:
        raise ValueError(f"dimension mismatch: A is {A.nrows}x{A.ncols}, x has shape {x.shape}")
    return A._csr @ x


def frobenius_norm(A: SparseMatrix) -> float:
    return float(np.sqrt(np.sum(A.values * A.values)))


def two_norm_estimate(A: SparseMatrix, max_iters: int = 100, tol: float = 1e-6):
    """Power iteration on ``A^T A``.

    Seeded with a fixed positive pseudo-random vector, not all ones: on
    symmetric grids (Poisson with even ``n``) the all-ones vector is exactly
    orthogonal to the dominant singular vector.

    Returns ``(estimate, converged)``. The estimate is ``||A v||`` for the
    current unit iterate ``v``, so it never exceeds the true 2-norm.
    """
    if A.nrows == 0 or A.ncols == 0:
        raise ValueError("two_norm_estimate needs a nonempty matrix")
    At = A._csr.T.tocsr()
    v = np.random.default_rng(0).uniform(0.5, 1.5, A.ncols)
    v /= np.linalg.norm(v)
    est = 0.0
    converged = False
    for _ in range(max_iters):
        w = A._csr @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0, True
        u = At @ w
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return new, True
        v = u / nu
        if est > 0 and abs(new - est) <= tol * new:
            est = new
            converged = True
            break
        est = new
    est = max(est, float(np.linalg.norm(A._csr @ v)))
    return est, converged


def matrix_info(A: SparseMatrix, max_iters: int = 100, tol: float = 1e-6) -> MatrixInfo:
    est, ok = two_norm_estimate(A, max_iters, tol)
    absA = abs(A._csr)
    n1 = float(absA.sum(axis=0).max()) if A.nnz else 0.0
    ninf = float(absA.sum(axis=1).max()) if A.nnz else 0.0
    return MatrixInfo(frobenius_norm(A), est, ok, A.nnz, A.shape, float(np.sqrt(n1 * ninf)))


def identity(n: int) -> SparseMatrix:
    idx = np.arange(n)
    return SparseMatrix(n, n, np.arange(n + 1), idx, np.ones(n))


def gen_poisson(n: int) -> SparseMatrix:
    """2-D 5-point Laplacian on an ``n x n`` grid (``n^2`` unknowns).

    Same ordering and signs as MATLAB's ``gallery('poisson', n)``.
    """
    if n < 1:
        raise ValueError("poisson grid size must be >= 1")
    t = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    eye = sp.identity(n)
    A = (sp.kron(eye, t) + sp.kron(t, eye)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return SparseMatrix(n * n, n * n, A.indptr, A.indices, A.data)


def random_sparse(n: int, density: float = 0.05, seed: int = 0, shift: float | None = None) -> SparseMatrix:
    """Random nonsymmetric sparse matrix with a dominant diagonal.

    ``shift`` is added to the diagonal; by default it is large enough to
    keep the matrix comfortably nonsingular.
    """
    rng = np.random.default_rng(seed)
    M = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal, format="coo")
    if shift is None:
        shift = 1.0 + 2.0 * np.sqrt(density * n)
    rows = np.concatenate([M.row, np.arange(n)])
    cols = np.concatenate([M.col, np.arange(n)])
    vals = np.concatenate([M.data, np.full(n, shift)])
    return SparseMatrix.from_coo(n, n, rows, cols, vals)
