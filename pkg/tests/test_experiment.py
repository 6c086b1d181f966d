import csv

import numpy as np
import pytest

from ftgmres.experiment import (CSV_COLUMNS, MatrixSource, SolverSettings, SweepPlan, load_rows,
                                run_one, run_sweep, summarize)
from ftgmres.sdc import FaultClass, MgsPosition

SMALL = SolverSettings(inner_iters=5)


def small_plan(**kw):
    kw.setdefault("fault_classes", (FaultClass.LARGE, FaultClass.NEARLY_ZERO))
    kw.setdefault("detector_settings", (False, True))
    return SweepPlan(MatrixSource("poisson", "10"), SMALL, **kw)


@pytest.fixture(scope="module")
def swept(tmp_path_factory):
    path = tmp_path_factory.mktemp("sweep") / "out.csv"
    rows = run_sweep(small_plan(), path)
    return path, rows


def test_matrix_source():
    assert MatrixSource("poisson", "4").load().shape == (16, 16)
    assert MatrixSource("random", "30:2").matrix_id == "random30:2"
    assert MatrixSource("file", "/x/mult_dcop_03.mtx").matrix_id == "mult_dcop_03"
    with pytest.raises(ValueError):
        MatrixSource("bogus", "1").load()


def test_plan_grid():
    runs = small_plan().runs(7)
    assert [r.fault for r in runs[:2]] == [None, None]
    faulted = runs[2:]
    assert len(faulted) == 2 * 2 * 1 * (7 + 1) * 5
    assert max(r.fault.target_inner_solve for r in faulted) == 8


def test_header_and_baseline_rows(swept):
    path, rows = swept
    with open(path, newline="") as fh:
        assert next(csv.reader(fh)) == CSV_COLUMNS
    base = [r for r in rows if r["fault_class"] == "none"]
    assert [r["detector"] for r in base] == ["off", "on"]
    assert rows[:2] == base
    for r in base:
        assert r["fired"] == "0" and r["detected"] == "0" and r["delta"] == "0"
        assert r["status"] == "Converged"


def test_exactly_one_fault_per_run(swept):
    _, rows = swept
    for r in rows:
        if r["fired"] == "1":
            assert r["observed_h"] and r["injected_h"]
        else:
            assert r["injected_h"] == ""
            if r["fault_class"] != "none":
                assert r["status"].endswith("/not-fired")


def test_margin_rows_not_fired(swept):
    _, rows = swept
    base = int(rows[0]["outer_iters"])
    beyond = [r for r in rows if int(r["target_solve"]) > base]
    assert beyond and all(r["fired"] == "0" for r in beyond)


def test_class1_detector_on_detected(swept):
    _, rows = swept
    bound = float(np.sqrt(np.sum(np.square(MatrixSource("poisson", "10").load().values))))
    for r in rows:
        if r["fault_class"] == "1" and r["detector"] == "on" and r["fired"] == "1":
            assert r["detected"] == "1" or abs(float(r["injected_h"])) <= bound


def test_deterministic_bytes(swept, tmp_path):
    path, _ = swept
    again = tmp_path / "again.csv"
    run_sweep(small_plan(), again)
    assert again.read_bytes() == path.read_bytes()


def test_parallel_matches_serial(swept, tmp_path):
    path, _ = swept
    par = tmp_path / "par.csv"
    run_sweep(small_plan(), par, jobs=2)
    assert par.read_bytes() == path.read_bytes()


def test_resume(swept, tmp_path):
    path, rows = swept
    partial = tmp_path / "partial.csv"
    lines = path.read_text().splitlines(keepends=True)
    partial.write_text("".join(lines[:20]))
    calls = []
    run_sweep(small_plan(), partial, progress=lambda i, n: calls.append(n))
    assert calls and calls[0] == len(rows) - 19
    assert partial.read_bytes() == path.read_bytes()


def test_resume_refuses_other_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n")
    with pytest.raises(ValueError):
        run_sweep(small_plan(), p)


def test_in_memory_sweep():
    rows = run_sweep(small_plan(fault_classes=(FaultClass.SLIGHTLY_SMALLER,), detector_settings=(False,),
                                mgs_positions=(MgsPosition.LAST,), margin=0))
    assert rows[0]["fault_class"] == "none"
    assert all(r["fired"] == "1" for r in rows[1:])


def test_summarize(swept):
    _, rows = swept
    summary = summarize(rows)
    assert set(summary) == {(d, c, "first") for d in ("off", "on") for c in ("1", "3")}
    for g in summary.values():
        assert g.fired <= g.runs and g.converged == g.fired
        assert 0.0 <= g.zero_fraction <= 1.0


def test_baseline_must_converge():
    plan = SweepPlan(MatrixSource("poisson", "10"), SolverSettings(inner_iters=1, outer_max=2))
    with pytest.raises(RuntimeError):
        run_sweep(plan)


def test_run_one_halt():
    from ftgmres.sdc import DetectorAction, FaultSpec
    A = MatrixSource("poisson", "10").load()
    rep = run_one(A, SolverSettings(inner_iters=5, detector_action=DetectorAction.HALT), True,
                  FaultSpec(2, 1, MgsPosition.FIRST, FaultClass.LARGE))
    assert rep.status == "Halted" and rep.fault_fired is not None and len(rep.detector_events) == 1
