"""Flexible GMRES and the FT-GMRES inner/outer composition."""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gmres import GmresConfig, GmresOutcome, Status, as_operator, frobenius_hint, gmres_solve, vnorm
from .hessenberg import HessenbergFactor, LsqMode, LsqPolicy, RankReport
from .sdc import DetectorEvent, FaultInjector, FiredFault

log = logging.getLogger(__name__)

# z = inner(q, outer_iteration)
InnerSolver = Callable[[np.ndarray, int], np.ndarray]

OUTER_DEFAULT = GmresConfig(max_iters=100, rtol=1e-8,
                            lsq_policy=LsqPolicy(LsqMode.ALWAYS_RANK_REVEALING))


class Trichotomy(enum.Enum):
    CONVERGED_TO_TOLERANCE = "ConvergedToTolerance"
    INVARIANT_SUBSPACE = "InvariantSubspace"
    RANK_DEFICIENT_FAILURE = "RankDeficientFailure"


@dataclass
class FlexibleState:
    basis_q: list[np.ndarray]
    basis_z: list[np.ndarray]
    hessenberg: HessenbergFactor
    beta: float
    x0: np.ndarray


@dataclass
class FlexibleOutcome(GmresOutcome):
    explicit_residuals: list[float] = field(default_factory=list)
    rank_reports: list[RankReport] = field(default_factory=list)
    flexible_state: FlexibleState | None = field(default=None, repr=False)


def identity_inner(q: np.ndarray, outer_iter: int) -> np.ndarray:
    return q.copy()


def fgmres_solve(A, b, x0=None, inner: InnerSolver = identity_inner,
                 cfg: GmresConfig = OUTER_DEFAULT) -> tuple[FlexibleOutcome, Trichotomy | None]:
    """Flexible GMRES; every arithmetic step here is treated as reliable.

    Each iteration recomputes ``||b - A x_j||`` explicitly and stops when it
    drops to ``rtol * ||b||`` (``rtol = 0`` disables the test). Otherwise a vanishing ``h_{j+1,j}`` ends the
    solve in InvariantSubspace when ``H(1:j,1:j)`` has full numerical rank,
    or RankDeficientFailure when it does not. The trichotomy is ``None``
    only when ``max_iters`` ran out.
    """
    op = as_operator(A)
    b = np.asarray(b, dtype=np.float64)
    x0 = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    if x0.shape != b.shape:
        raise ValueError("x0 and b must have the same shape")

    r0 = b - op(x0)
    beta = vnorm(r0)
    bnorm = vnorm(b)
    factor = HessenbergFactor(beta)
    st = FlexibleState([], [], factor, beta, x0)
    if beta == 0.0:
        out = FlexibleOutcome(x0.copy(), Status.CONVERGED, 0, [0.0], explicit_residuals=[0.0],
                              flexible_state=st)
        return out, Trichotomy.CONVERGED_TO_TOLERANCE
    st.basis_q.append(r0 / beta)
    fro = frobenius_hint(A) if cfg.happy_tol is None else None
    tau = cfg.lsq_policy.truncation_tol
    stop_at = cfg.rtol * (bnorm if bnorm > 0 else beta)

    history = [beta]
    explicit = [beta]
    ranks: list[RankReport] = []
    x = x0.copy()
    status, tri = Status.MAX_ITERS, None
    Q, Z = st.basis_q, st.basis_z

    for j in range(1, cfg.max_iters + 1):
        q = Q[j - 1]
        z = np.array(inner(q, j), dtype=np.float64)
        if z.shape != q.shape or not np.all(np.isfinite(z)):
            log.warning("inner solve %d returned an unusable vector; using q_j instead", j)
            z = q.copy()
        Z.append(z)
        v = np.array(op(z), dtype=np.float64)
        vnorm0 = vnorm(v)
        h = np.empty(j + 1)
        for i in range(j):
            h[i] = float(np.dot(Q[i], v))
            v -= h[i] * Q[i]
        hnext = vnorm(v)
        h[j] = hnext
        factor.absorb_column(h)
        rank = factor.rank_of_leading_block(j, tau)
        ranks.append(rank)

        y, _ = factor.solve_update(cfg.lsq_policy)
        if np.all(np.isfinite(y)):
            x = x0 + np.column_stack(Z) @ y
        history.append(factor.implicit_residual)
        res = vnorm(b - op(x))
        explicit.append(res)

        if cfg.rtol > 0 and res <= stop_at:
            status, tri = Status.CONVERGED, Trichotomy.CONVERGED_TO_TOLERANCE
            break
        happy_tol = cfg.happy_tol if cfg.happy_tol is not None else (
            1e-14 * (fro * vnorm(z) if fro is not None else vnorm0))
        if hnext <= happy_tol:
            status = Status.HAPPY_BREAKDOWN
            if rank.full_rank:
                tri = Trichotomy.INVARIANT_SUBSPACE
            else:
                tri = Trichotomy.RANK_DEFICIENT_FAILURE
                log.error("FGMRES: H(1:%d,1:%d) is rank deficient (rank %d); did not converge",
                          j, j, rank.numerical_rank)
            break
        Q.append(v / hnext)

    out = FlexibleOutcome(x, status, len(Z), history, explicit_residuals=explicit,
                          rank_reports=ranks, flexible_state=st)
    return out, tri


@dataclass
class InnerRecord:
    outer_iter: int
    iterations: int
    status: Status
    max_abs_h: float
    detector_events: list[DetectorEvent]


class GmresInner:
    """Sandboxed inner GMRES used as the flexible preconditioner.

    Always returns a finite vector. When the inner solve could not complete
    a single iteration (detector abort or non-finite data on the first
    column) it hands back ``q`` itself, i.e. one step of no preconditioning.
    """

    def __init__(self, A, cfg: GmresConfig, injector: FaultInjector | None = None):
        self.A = A
        self.cfg = cfg
        self.injector = injector
        self.records: list[InnerRecord] = []

    def __call__(self, q: np.ndarray, outer_iter: int) -> np.ndarray:
        inj = self.injector
        if inj is not None and (not inj.armed or inj.spec.target_inner_solve != outer_iter):
            inj = None
        res = gmres_solve(self.A, q, None, self.cfg, inj, solve_index=outer_iter)
        self.records.append(InnerRecord(outer_iter, res.iterations, res.status, res.max_abs_h,
                                        res.detector_events))
        if res.iterations == 0 and res.status in (Status.DETECTOR_ABORT, Status.NUMERICAL_BREAKDOWN):
            return q.copy()
        return res.x


@dataclass
class SolveReport:
    matrix_id: str
    config: dict
    status: str
    outer_iterations: int
    inner_iterations_per_outer: list[int]
    residual_history: list[float]
    explicit_residual_history: list[float]
    detector_events: list[DetectorEvent]
    fault_fired: FiredFault | None
    wall_time: float
    trichotomy: Trichotomy | None = None
    inner_max_abs_h: list[float] = field(default_factory=list)
    x: np.ndarray | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status in ("Converged", "InvariantSubspace")


def report_status(status: Status, tri: Trichotomy | None) -> str:
    if tri is Trichotomy.CONVERGED_TO_TOLERANCE:
        return "Converged"
    if tri is not None:
        return tri.value
    return status.value


def ftgmres_solve(A, b, x0=None, inner_cfg: GmresConfig = GmresConfig(max_iters=25),
                  outer_cfg: GmresConfig = OUTER_DEFAULT, injector: FaultInjector | None = None,
                  matrix_id: str = "") -> SolveReport:
    """Reliable outer FGMRES around an unreliable fixed-length inner GMRES.

    The injector only reaches the inner solve numbered
    ``injector.spec.target_inner_solve``.
    """
    t0 = time.perf_counter()
    inner = GmresInner(A, inner_cfg, injector)
    out, tri = fgmres_solve(A, b, x0, inner, outer_cfg)
    events = [ev for rec in inner.records for ev in rec.detector_events]
    det = inner_cfg.detector
    config = {
        "inner_iters": inner_cfg.max_iters,
        "inner_lsq": inner_cfg.lsq_policy.mode.value,
        "outer_max": outer_cfg.max_iters,
        "rtol": outer_cfg.rtol,
        "outer_lsq": outer_cfg.lsq_policy.mode.value,
        "detector": "on" if det is not None else "off",
        "detector_action": det.action.value if det is not None else "",
        "detector_bound": det.bound if det is not None else float("nan"),
    }
    return SolveReport(
        matrix_id=matrix_id,
        config=config,
        status=report_status(out.status, tri),
        outer_iterations=out.iterations,
        inner_iterations_per_outer=[rec.iterations for rec in inner.records],
        residual_history=out.residual_history,
        explicit_residual_history=out.explicit_residuals,
        detector_events=events,
        fault_fired=injector.fired if injector is not None else None,
        wall_time=time.perf_counter() - t0,
        trichotomy=tri,
        inner_max_abs_h=[rec.max_abs_h for rec in inner.records],
        x=out.x,
    )
