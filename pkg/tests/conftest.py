import os
from pathlib import Path

import numpy as np
import pytest

from ftgmres.sparse import SparseMatrix, gen_poisson

ROOT = Path(__file__).resolve().parents[1]

# outer iterations of the fault-free FT-GMRES solve of poisson(100), b = ones,
# x0 = 0, 25 inner iterations, rtol 1e-8 (recorded by running it)
POISSON_BASELINE_OUTER = 10


def mult_dcop_path():
    cand = [os.environ.get("FTGMRES_MULT_DCOP"), ROOT / "data" / "mult_dcop_03.mtx"]
    for c in cand:
        if c and Path(c).is_file():
            return Path(c)
    return None


def well_conditioned(n, seed, cond=300.0):
    """Dense ``U diag(s) V^T`` with singular values spread over [1, cond]."""
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.geomspace(1.0, cond, n)
    return (U * s) @ V.T


@pytest.fixture(scope="session")
def poisson100() -> SparseMatrix:
    return gen_poisson(100)


# -- acceptance reporting: one PASS/FAIL line per criterion ------------------

_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("acceptance")
    if m is None or call.when != "call":
        return
    if call.excinfo is None:
        verdict = "PASS"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        verdict = "SKIP"
    else:
        verdict = "FAIL"
    _acceptance.append((m.args[0], verdict, m.args[1], item.name))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num, verdict, title, name in sorted(_acceptance):
        terminalreporter.write_line(f"[{verdict}] criterion {num:>2}: {title} ({name})")
