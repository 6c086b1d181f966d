"""Incremental Givens QR of the Arnoldi Hessenberg matrix and the projected
least-squares solve for the update coefficients."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class LsqMode(enum.Enum):
    STANDARD = "standard"
    FALLBACK_ON_NONFINITE = "fallback"
    ALWAYS_RANK_REVEALING = "svd"


@dataclass(frozen=True)
class LsqPolicy:
    """How to solve ``R y = z`` once the rotations have been applied.

    ``FALLBACK_ON_NONFINITE`` only switches to the truncated SVD when the
    triangular solve produced Inf/NaN. It hides the IEEE signal without
    bounding the error, so prefer STANDARD or ALWAYS_RANK_REVEALING.
    """

    mode: LsqMode = LsqMode.STANDARD
    truncation_tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.truncation_tol < 1.0:
            raise ValueError("truncation_tol must lie in [0, 1)")


@dataclass(frozen=True)
class RankReport:
    numerical_rank: int
    sigma_max: float
    sigma_min_kept: float
    dim: int

    @property
    def full_rank(self) -> bool:
        return self.numerical_rank == self.dim


class NonFiniteColumnError(ValueError):
    def __init__(self, index: int, value: float):
        super().__init__(f"non-finite Hessenberg entry {value!r} at row {index}")
        self.index = index
        self.value = value


def givens(a: float, b: float) -> tuple[float, float]:
    """Rotation ``(c, s)`` with ``[[c, s], [-s, c]] @ [a, b] = [r, 0]``."""
    if b == 0.0:
        return 1.0, 0.0
    r = math.hypot(a, b)
    return a / r, b / r


def back_substitute(R: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Plain upper-triangular solve; singular diagonals produce Inf/NaN."""
    k = R.shape[0]
    y = np.zeros(k)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for i in range(k - 1, -1, -1):
            y[i] = (z[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def truncated_svd_solve(M: np.ndarray, rhs: np.ndarray, tol: float):
    """Minimum-norm least-squares solution of ``M y = rhs`` keeping singular
    values ``>= tol * sigma_max`` (and strictly positive)."""
    U, s, Vt = np.linalg.svd(M)
    smax = float(s[0]) if s.size else 0.0
    keep = (s > 0.0) & (s >= tol * smax)
    r = int(np.count_nonzero(keep))
    coef = (U[:, :r].T @ rhs) / s[:r]
    y = Vt[:r].T @ coef
    report = RankReport(r, smax, float(s[r - 1]) if r else 0.0, min(M.shape))
    return y, report


def rank_report(M: np.ndarray, tol: float) -> RankReport:
    s = np.linalg.svd(M, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    keep = s[(s > 0.0) & (s >= tol * smax)]
    return RankReport(int(keep.size), smax, float(keep[-1]) if keep.size else 0.0, min(M.shape))


def solve_triangular_policy(R: np.ndarray, z: np.ndarray, policy: LsqPolicy):
    """Solve ``R y = z`` under ``policy``; returns ``(y, RankReport | None)``.

    The report is ``None`` when only the triangular solve ran.
    """
    R = np.asarray(R, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if R.shape[0] == 0:
        raise ValueError("no columns to solve with")
    if policy.mode is LsqMode.ALWAYS_RANK_REVEALING:
        return truncated_svd_solve(R, z, policy.truncation_tol)
    y = back_substitute(R, z)
    if policy.mode is LsqMode.FALLBACK_ON_NONFINITE and not np.all(np.isfinite(y)):
        return truncated_svd_solve(R, z, policy.truncation_tol)
    return y, None


class HessenbergFactor:
    """Growing ``(k+1) x k`` upper Hessenberg matrix with its Givens QR.

    Column ``k`` (1-based) has ``k + 1`` entries. After each absorbed column
    the transformed right-hand side ``g`` satisfies
    ``min_y ||H y - beta e1|| = |g[k]|``.
    """

    def __init__(self, beta: float):
        self.beta = float(beta)
        self.h_columns: list[np.ndarray] = []
        self.givens: list[tuple[float, float]] = []
        self._r_columns: list[np.ndarray] = []
        self.g_rhs = np.array([self.beta])

    @property
    def ncols(self) -> int:
        return len(self.h_columns)

    @property
    def implicit_residual(self) -> float:
        return abs(float(self.g_rhs[-1]))

    def residual_norm(self) -> float:
        if not self.h_columns:
            raise ValueError("no columns absorbed")
        return self.implicit_residual

    def absorb_column(self, col) -> "HessenbergFactor":
        col = np.array(col, dtype=np.float64)
        k = self.ncols
        if col.shape != (k + 2,):
            raise ValueError(f"column {k + 1} must have {k + 2} entries, got {col.shape}")
        bad = ~np.isfinite(col)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NonFiniteColumnError(i, float(col[i]))
        raw = col.copy()
        for i, (c, s) in enumerate(self.givens):
            a, b = col[i], col[i + 1]
            col[i] = c * a + s * b
            col[i + 1] = -s * a + c * b
        c, s = givens(col[k], col[k + 1])
        col[k] = c * col[k] + s * col[k + 1]
        col[k + 1] = 0.0
        g = np.append(self.g_rhs, 0.0)
        g[k], g[k + 1] = c * g[k], -s * g[k]
        self.h_columns.append(raw)
        self.givens.append((c, s))
        self._r_columns.append(col[: k + 1])
        self.g_rhs = g
        return self

    def r_upper(self, ncols: int | None = None) -> np.ndarray:
        k = self.ncols if ncols is None else ncols
        R = np.zeros((k, k))
        for j in range(k):
            R[: j + 1, j] = self._r_columns[j]
        return R

    def hessenberg(self, ncols: int | None = None) -> np.ndarray:
        """Raw ``(k+1) x k`` matrix from the absorbed columns."""
        k = self.ncols if ncols is None else ncols
        H = np.zeros((k + 1, k))
        for j in range(k):
            H[: j + 2, j] = self.h_columns[j]
        return H

    def solve_update(self, policy: LsqPolicy = LsqPolicy(), ncols: int | None = None):
        """Update coefficients from the first ``ncols`` columns (default all)."""
        k = self.ncols if ncols is None else ncols
        if k < 1 or k > self.ncols:
            raise ValueError(f"cannot solve with {k} columns ({self.ncols} absorbed)")
        return solve_triangular_policy(self.r_upper(k), self.g_rhs[:k], policy)

    def rank_of_leading_block(self, j: int, tol: float = 1e-12) -> RankReport:
        """Numerical rank of the square block ``H(1:j, 1:j)``."""
        if not 1 <= j <= self.ncols:
            raise ValueError(f"leading block {j} not available ({self.ncols} absorbed)")
        return rank_report(self.hessenberg(j)[:j, :j], tol)
