"""Single-fault sweeps over every (inner solve, inner iteration) site.

Each row of the output CSV is one FT-GMRES solve with at most one injected
fault; ``delta`` is its outer iteration count minus the fault-free
baseline.
"""

from __future__ import annotations

import csv
import os
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .flexible import OUTER_DEFAULT, SolveReport, ftgmres_solve
from .gmres import GmresConfig
from .hessenberg import LsqMode, LsqPolicy
from .mmio import read_matrix_market
from .sdc import (DetectorAction, DetectorConfig, FaultClass, FaultInjector, FaultSpec, MgsPosition,
                  SDCDetected)
from .sparse import SparseMatrix, gen_poisson, random_sparse

CSV_COLUMNS = ["matrix_id", "detector", "action", "fault_class", "mgs_pos", "target_solve",
               "target_iter", "fired", "observed_h", "injected_h", "detected", "outer_iters",
               "delta", "status"]
KEY_COLUMNS = ("detector", "action", "fault_class", "mgs_pos", "target_solve", "target_iter")


@dataclass(frozen=True)
class MatrixSource:
    kind: str  # "poisson" | "file" | "random"
    value: str

    @property
    def matrix_id(self) -> str:
        if self.kind == "file":
            return os.path.splitext(os.path.basename(self.value))[0]
        return f"{self.kind}{self.value}"

    def load(self) -> SparseMatrix:
        if self.kind == "poisson":
            return gen_poisson(int(self.value))
        if self.kind == "file":
            return read_matrix_market(self.value)
        if self.kind == "random":
            n, _, seed = self.value.partition(":")
            return random_sparse(int(n), seed=int(seed or 0))
        raise ValueError(f"unknown matrix source {self.kind!r}")


@dataclass(frozen=True)
class SolverSettings:
    inner_iters: int = 25
    outer_max: int = 100
    rtol: float = 1e-8
    inner_lsq: LsqMode = LsqMode.STANDARD
    outer_lsq: LsqMode = LsqMode.ALWAYS_RANK_REVEALING
    detector_action: DetectorAction = DetectorAction.ABORT_INNER

    def inner_config(self, A, detector: bool) -> GmresConfig:
        det = DetectorConfig.for_matrix(A, self.detector_action) if detector else None
        return GmresConfig(max_iters=self.inner_iters, rtol=0.0, detector=det,
                           lsq_policy=LsqPolicy(self.inner_lsq))

    def outer_config(self) -> GmresConfig:
        return replace(OUTER_DEFAULT, max_iters=self.outer_max, rtol=self.rtol,
                       lsq_policy=LsqPolicy(self.outer_lsq))


def default_rhs(A: SparseMatrix) -> np.ndarray:
    return np.ones(A.nrows)


def run_one(A: SparseMatrix, settings: SolverSettings, detector: bool,
            spec: FaultSpec | None = None, matrix_id: str = "") -> SolveReport:
    """One FT-GMRES solve with ``b = ones``, ``x0 = 0``. HALT surfaces as status "Halted"."""
    inj = FaultInjector(spec) if spec is not None else None
    inner = settings.inner_config(A, detector)
    try:
        return ftgmres_solve(A, default_rhs(A), None, inner, settings.outer_config(), inj, matrix_id)
    except SDCDetected as exc:
        loc = exc.event.location
        return SolveReport(matrix_id, {}, "Halted", loc.outer_iter, [], [], [], [exc.event],
                           inj.fired if inj is not None else None, 0.0)


@dataclass(frozen=True)
class RunSpec:
    detector: bool
    fault: FaultSpec | None


@dataclass(frozen=True)
class SweepPlan:
    source: MatrixSource
    settings: SolverSettings = SolverSettings()
    fault_classes: tuple[FaultClass, ...] = (FaultClass.SLIGHTLY_SMALLER, FaultClass.NEARLY_ZERO)
    mgs_positions: tuple[MgsPosition, ...] = (MgsPosition.FIRST,)
    detector_settings: tuple[bool, ...] = (False,)
    margin: int = 1

    def runs(self, baseline_outer: int) -> list[RunSpec]:
        out = [RunSpec(d, None) for d in self.detector_settings]
        for det in self.detector_settings:
            for fc in self.fault_classes:
                for pos in self.mgs_positions:
                    for s in range(1, baseline_outer + self.margin + 1):
                        for j in range(1, self.settings.inner_iters + 1):
                            out.append(RunSpec(det, FaultSpec(s, j, pos, fc)))
        return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def make_row(report: SolveReport, run: RunSpec, settings: SolverSettings, baseline: int) -> dict:
    fired = report.fault_fired
    f = run.fault
    return {
        "matrix_id": report.matrix_id,
        "detector": "on" if run.detector else "off",
        "action": settings.detector_action.value if run.detector else "",
        "fault_class": int(f.fault_class) if f else "none",
        "mgs_pos": f.mgs_position.value if f else "",
        "target_solve": f.target_inner_solve if f else 0,
        "target_iter": f.target_inner_iteration if f else 0,
        "fired": fired is not None,
        "observed_h": fired.original if fired else "",
        "injected_h": fired.injected if fired else "",
        "detected": bool(report.detector_events),
        "outer_iters": report.outer_iterations,
        "delta": report.outer_iterations - baseline,
        "status": report.status if (fired or f is None) else f"{report.status}/not-fired",
    }


_worker: dict = {}


def _init_worker(source: MatrixSource):
    _worker["A"] = source.load()
    _worker["id"] = source.matrix_id


def _work(args):
    run, settings, baseline = args
    rep = run_one(_worker["A"], settings, run.detector, run.fault, _worker["id"])
    return make_row(rep, run, settings, baseline)


def _row_key(row: dict) -> tuple:
    return tuple(str(row[k]) if not isinstance(row[k], bool) else _fmt(row[k]) for k in KEY_COLUMNS)


def _existing_rows(path) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"{path} exists with a different header; refusing to resume")
        return list(reader)


def run_sweep(plan: SweepPlan, out_csv=None, jobs: int = 1, A: SparseMatrix | None = None,
              progress=None) -> list[dict]:
    """Run the baseline, then every planned fault; rows are flushed as they finish.

    An existing ``out_csv`` with the same header is resumed: rows whose key
    columns are already present are not rerun. Rows are returned as the
    strings written to the CSV.
    """
    A = plan.source.load() if A is None else A
    mid = plan.source.matrix_id
    base = run_one(A, plan.settings, False, None, mid)
    if not base.converged:
        raise RuntimeError(f"baseline solve did not converge ({base.status})")
    baseline = base.outer_iterations
    runs = plan.runs(baseline)

    done = {}
    fh = writer = None
    if out_csv is not None:
        for row in _existing_rows(out_csv):
            done[tuple(row[k] for k in KEY_COLUMNS)] = row
        fresh = not os.path.exists(out_csv)
        fh = open(out_csv, "a", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        if fresh:
            writer.writerow(CSV_COLUMNS)
            fh.flush()

    def key_of(run: RunSpec) -> tuple:
        f = run.fault
        return ("on" if run.detector else "off",
                plan.settings.detector_action.value if run.detector else "",
                str(int(f.fault_class)) if f else "none", f.mgs_position.value if f else "",
                str(f.target_inner_solve if f else 0), str(f.target_inner_iteration if f else 0))

    todo = [r for r in runs if key_of(r) not in done]
    rows: list[dict] = []

    def emit(row):
        rows.append(row)
        if writer is not None:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
            fh.flush()
        if progress is not None:
            progress(len(rows), len(todo))

    try:
        if jobs > 1 and todo:
            with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(plan.source,)) as ex:
                for row in ex.map(_work, [(r, plan.settings, baseline) for r in todo], chunksize=4):
                    emit(row)
        else:
            for r in todo:
                if r.fault is None and not r.detector:
                    rep = base
                else:
                    rep = run_one(A, plan.settings, r.detector, r.fault, mid)
                emit(make_row(rep, r, plan.settings, baseline))
    finally:
        if fh is not None:
            fh.close()
    if out_csv is not None:
        return load_rows(out_csv)
    return [{c: _fmt(row[c]) for c in CSV_COLUMNS} for row in rows]


def load_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class GroupSummary:
    runs: int = 0
    fired: int = 0
    detected: int = 0
    converged: int = 0
    deltas: Counter = field(default_factory=Counter)

    @property
    def max_delta(self) -> int:
        return max(self.deltas, default=0)

    @property
    def zero_fraction(self) -> float:
        n = sum(self.deltas.values())
        return self.deltas.get(0, 0) / n if n else 1.0


def summarize(rows) -> dict[tuple, GroupSummary]:
    """Per (detector, fault_class, mgs_pos) statistics over fired rows."""
    groups: dict[tuple, GroupSummary] = defaultdict(GroupSummary)
    for row in rows:
        if str(row["fault_class"]) == "none":
            continue
        g = groups[(str(row["detector"]), str(row["fault_class"]), str(row["mgs_pos"]))]
        g.runs += 1
        if str(row["fired"]) in ("1", "True"):
            g.fired += 1
            g.deltas[int(row["delta"])] += 1
            g.detected += str(row["detected"]) in ("1", "True")
            g.converged += str(row["status"]).split("/")[0] in ("Converged", "InvariantSubspace")
    return dict(groups)
