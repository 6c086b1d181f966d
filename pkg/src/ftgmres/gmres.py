"""GMRES with Modified Gram-Schmidt Arnoldi, detector and injection hooks."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .hessenberg import HessenbergFactor, LsqPolicy
from .sdc import (NORM, DetectorAction, DetectorConfig, DetectorEvent, FaultInjector, Location,
                  SDCDetected, check)
from .sparse import SparseMatrix, frobenius_norm


def vnorm(x: np.ndarray) -> float:
    """Scaled 2-norm (BLAS nrm2); does not overflow for entries near 1e200."""
    return float(scipy.linalg.norm(x, check_finite=False))

Operator = Callable[[np.ndarray], np.ndarray]


def as_operator(A) -> Operator:
    """Accept a SparseMatrix, a dense/scipy matrix, or a plain callable."""
    if isinstance(A, SparseMatrix):
        return A.matvec
    if callable(A):
        return A
    if hasattr(A, "__matmul__"):
        return lambda x: A @ x
    raise TypeError(f"cannot use {type(A).__name__} as a linear operator")


def frobenius_hint(A) -> float | None:
    if isinstance(A, SparseMatrix):
        return frobenius_norm(A)
    if isinstance(A, np.ndarray):
        return float(np.linalg.norm(A))
    return None


class Status(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    HAPPY_BREAKDOWN = "HappyBreakdown"
    DETECTOR_ABORT = "DetectorAbort"
    NUMERICAL_BREAKDOWN = "NumericalBreakdown"


@dataclass(frozen=True)
class GmresConfig:
    """Solver knobs.

    ``rtol = 0`` runs exactly ``max_iters`` iterations (barring breakdown).
    ``happy_tol = None`` means ``1e-14 * ||A||_F`` when the norm is known,
    else ``1e-14 * ||A q_j||``.
    """

    max_iters: int = 25
    rtol: float = 0.0
    happy_tol: float | None = None
    detector: DetectorConfig | None = None
    lsq_policy: LsqPolicy = LsqPolicy()

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rtol < 0 or (self.happy_tol is not None and self.happy_tol < 0):
            raise ValueError("tolerances must be nonnegative")


@dataclass
class KrylovState:
    basis_q: list[np.ndarray]
    hessenberg: HessenbergFactor
    beta: float
    x0: np.ndarray
    iteration: int = 0

    def basis_matrix(self, ncols: int | None = None) -> np.ndarray:
        k = len(self.basis_q) if ncols is None else ncols
        return np.column_stack(self.basis_q[:k]) if k else np.zeros((self.x0.size, 0))


@dataclass
class GmresOutcome:
    x: np.ndarray
    status: Status
    iterations: int
    residual_history: list[float]
    detector_events: list[DetectorEvent] = field(default_factory=list)
    state: KrylovState | None = field(default=None, repr=False)

    @property
    def max_abs_h(self) -> float:
        cols = self.state.hessenberg.h_columns if self.state else []
        return max((float(np.max(np.abs(c))) for c in cols), default=0.0)


def reconstruct_solution(state: KrylovState, y) -> np.ndarray:
    """``x0 + [q_1 .. q_k] y`` for ``k = len(y)``."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size > len(state.basis_q) or y.size > state.hessenberg.ncols:
        raise ValueError(f"{y.size} coefficients for {state.hessenberg.ncols} absorbed columns")
    x = state.x0.copy()
    for coef, q in zip(y, state.basis_q):
        x += coef * q
    return x


def _finish(state: KrylovState, ncols: int, policy: LsqPolicy) -> np.ndarray | None:
    """Iterate from the first ``ncols`` columns, or None if it is not finite."""
    if ncols == 0:
        return state.x0.copy()
    y, _ = state.hessenberg.solve_update(policy, ncols)
    if not np.all(np.isfinite(y)):
        return None
    x = reconstruct_solution(state, y)
    return x if np.all(np.isfinite(x)) else None


def gmres_solve(A, b, x0=None, cfg: GmresConfig = GmresConfig(),
                injector: FaultInjector | None = None, solve_index: int = 1) -> GmresOutcome:
    """Unrestarted GMRES.

    The injector may replace each ``h_{i,j}`` right after its dot product;
    the detector then checks the (possibly faulty) value, and also checks
    ``h_{j+1,j}`` before the breakdown test. ``solve_index`` labels event
    locations when this is an inner solve.
    """
    op = as_operator(A)
    b = np.asarray(b, dtype=np.float64)
    x0 = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    if x0.shape != b.shape:
        raise ValueError("x0 and b must have the same shape")
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(x0))):
        raise ValueError("b and x0 must be finite")

    r0 = b - op(x0)
    beta = vnorm(r0)
    factor = HessenbergFactor(beta)
    state = KrylovState([], factor, beta, x0)
    events: list[DetectorEvent] = []
    if beta == 0.0:
        return GmresOutcome(x0.copy(), Status.CONVERGED, 0, [0.0], events, state)
    state.basis_q.append(r0 / beta)

    bnorm = vnorm(b)
    stop_at = cfg.rtol * (bnorm if bnorm > 0 else beta)
    fro = frobenius_hint(A) if cfg.happy_tol is None else None
    det = cfg.detector
    history = [beta]
    status = Status.MAX_ITERS
    Q = state.basis_q

    def abort(ev: DetectorEvent, j: int) -> GmresOutcome:
        events.append(ev)
        if det.action is DetectorAction.HALT:
            raise SDCDetected(ev)
        x = _finish(state, j - 1, cfg.lsq_policy)
        if x is None:
            x = x0.copy()
        return GmresOutcome(x, Status.DETECTOR_ABORT, state.iteration, history, events, state)

    for j in range(1, cfg.max_iters + 1):
        v = np.array(op(Q[j - 1]), dtype=np.float64)
        vnorm0 = vnorm(v)
        h = np.empty(j + 1)
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(1, j + 1):
                hij = float(np.dot(Q[i - 1], v))
                if injector is not None:
                    hij = injector.maybe_inject(hij, Location(solve_index, j, i))
                if det is not None:
                    ev = check(det, hij, Location(solve_index, j, i))
                    if ev is not None:
                        if det.action is not DetectorAction.REPORT_ONLY:
                            return abort(ev, j)
                        events.append(ev)
                v -= hij * Q[i - 1]
                h[i - 1] = hij
            hnext = vnorm(v)
        if det is not None:
            ev = check(det, hnext, Location(solve_index, j, NORM))
            if ev is not None:
                if det.action is not DetectorAction.REPORT_ONLY:
                    return abort(ev, j)
                events.append(ev)
        h[j] = hnext
        if not np.all(np.isfinite(h)):
            x = _finish(state, j - 1, cfg.lsq_policy)
            return GmresOutcome(x0.copy() if x is None else x, Status.NUMERICAL_BREAKDOWN,
                                state.iteration, history, events, state)
        factor.absorb_column(h)
        state.iteration = j
        history.append(factor.implicit_residual)

        happy_tol = cfg.happy_tol if cfg.happy_tol is not None else 1e-14 * (fro if fro is not None else vnorm0)
        if hnext <= happy_tol:
            status = Status.HAPPY_BREAKDOWN
            break
        if cfg.rtol > 0 and factor.implicit_residual <= stop_at:
            status = Status.CONVERGED
            break
        Q.append(v / hnext)

    x = _finish(state, state.iteration, cfg.lsq_policy)
    if x is None:
        # singular triangular factor under the STANDARD policy
        k = state.iteration - 1
        while k > 0 and (x := _finish(state, k, cfg.lsq_policy)) is None:
            k -= 1
        return GmresOutcome(x0.copy() if x is None else x, Status.NUMERICAL_BREAKDOWN,
                            state.iteration, history, events, state)
    return GmresOutcome(x, status, state.iteration, history, events, state)
