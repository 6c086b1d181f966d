import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import well_conditioned
from ftgmres.gmres import (GmresConfig, KrylovState, Status, as_operator, gmres_solve,
                           reconstruct_solution)
from ftgmres.hessenberg import HessenbergFactor, LsqMode, LsqPolicy
from ftgmres.sdc import (BOUND_SLACK, DetectorAction, DetectorConfig, FaultClass, FaultInjector,
                         FaultSpec, MgsPosition, SDCDetected)
from ftgmres.sparse import SparseMatrix, frobenius_norm, identity, random_sparse


def test_identity_happy_breakdown():
    b = np.zeros(6)
    b[2] = 1.0
    out = gmres_solve(identity(6), b, cfg=GmresConfig(max_iters=10))
    assert out.status is Status.HAPPY_BREAKDOWN
    assert out.iterations == 1
    np.testing.assert_array_equal(out.x, b)
    assert out.residual_history[-1] == 0.0


def test_zero_rhs():
    out = gmres_solve(identity(3), np.zeros(3))
    assert out.status is Status.CONVERGED and out.iterations == 0


def test_dense_converges_against_lu():
    A = well_conditioned(20, seed=11)
    b = np.random.default_rng(11).standard_normal(20)
    out = gmres_solve(SparseMatrix.from_dense(A), b, cfg=GmresConfig(max_iters=20, rtol=1e-10))
    assert out.status in (Status.CONVERGED, Status.HAPPY_BREAKDOWN)
    x_ref = scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), b)
    assert np.linalg.norm(out.x - x_ref) <= 1e-8 * np.linalg.norm(x_ref)


def test_poisson_fixed_25(poisson100):
    out = gmres_solve(poisson100, np.ones(poisson100.nrows), cfg=GmresConfig(max_iters=25, rtol=0.0))
    assert out.status is Status.MAX_ITERS and out.iterations == 25
    assert len(out.residual_history) == 26
    assert out.max_abs_h <= 446.77


def test_arnoldi_invariants_poisson(poisson100):
    out = gmres_solve(poisson100, np.ones(poisson100.nrows), cfg=GmresConfig(max_iters=25))
    st_ = out.state
    Q = st_.basis_matrix()
    assert Q.shape[1] == 26
    np.testing.assert_allclose(np.linalg.norm(Q, axis=0), 1.0, atol=1e-12)
    assert np.linalg.norm(Q.T @ Q - np.eye(26)) <= 1e-8
    AQ = np.column_stack([poisson100.matvec(q) for q in st_.basis_q[:25]])
    assert np.linalg.norm(AQ - Q @ st_.hessenberg.hessenberg()) <= 1e-8 * frobenius_norm(poisson100)


def test_hessenberg_tridiagonal_for_spd(poisson100):
    out = gmres_solve(poisson100, np.ones(poisson100.nrows), cfg=GmresConfig(max_iters=25))
    H = out.state.hessenberg.hessenberg()
    assert np.max(np.abs(np.triu(H, 2))) < 1e-10 * np.max(np.abs(H))


def test_residual_matches_explicit():
    A = random_sparse(120, seed=4)
    b = np.random.default_rng(4).standard_normal(120)
    out = gmres_solve(A, b, cfg=GmresConfig(max_iters=15))
    explicit = np.linalg.norm(b - A.matvec(out.x))
    assert out.residual_history[-1] == pytest.approx(explicit, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 30))
def test_finite_termination(seed, n):
    A = well_conditioned(n, seed=seed, cond=50.0)
    b = np.random.default_rng(seed).standard_normal(n)
    out = gmres_solve(A, b, cfg=GmresConfig(max_iters=n, rtol=0.0))
    assert out.residual_history[-1] <= 1e-8 * np.linalg.norm(b)
    assert all(b2 <= a + 1e-14 for a, b2 in zip(out.residual_history, out.residual_history[1:]))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_hessenberg_bound_random(seed):
    A = random_sparse(150, density=0.03, seed=seed)
    b = np.random.default_rng(seed).standard_normal(150)
    out = gmres_solve(A, b, cfg=GmresConfig(max_iters=25))
    assert out.max_abs_h <= frobenius_norm(A) * (1 + BOUND_SLACK)


def test_detector_non_interference(poisson100):
    b = np.ones(poisson100.nrows)
    plain = gmres_solve(poisson100, b, cfg=GmresConfig(max_iters=25))
    det = DetectorConfig.for_matrix(poisson100, DetectorAction.REPORT_ONLY)
    watched = gmres_solve(poisson100, b, cfg=GmresConfig(max_iters=25, detector=det))
    assert watched.detector_events == []
    assert plain.x.tobytes() == watched.x.tobytes()
    assert plain.residual_history == watched.residual_history


def test_injection_taints_vector_update(poisson100):
    b = np.ones(poisson100.nrows)
    clean = gmres_solve(poisson100, b, cfg=GmresConfig(max_iters=5))
    inj = FaultInjector(FaultSpec(1, 3, MgsPosition.LAST, FaultClass.SLIGHTLY_SMALLER))
    faulty = gmres_solve(poisson100, b, cfg=GmresConfig(max_iters=5), injector=inj)
    H0, H1 = clean.state.hessenberg.hessenberg(), faulty.state.hessenberg.hessenberg()
    assert H1[2, 2] == pytest.approx(H0[2, 2] * 10 ** -0.5, rel=1e-12)
    # the corrupted coefficient also changed the orthogonalized vector
    assert H1[3, 2] != pytest.approx(H0[3, 2], rel=1e-6)
    np.testing.assert_array_equal(H1[:, :2], H0[:, :2])


def test_detector_abort_returns_last_iterate(poisson100):
    b = np.ones(poisson100.nrows)
    det = DetectorConfig.for_matrix(poisson100, DetectorAction.ABORT_INNER)
    inj = FaultInjector(FaultSpec(1, 4, MgsPosition.FIRST, FaultClass.LARGE))
    out = gmres_solve(poisson100, b, cfg=GmresConfig(max_iters=25, detector=det), injector=inj)
    ref = gmres_solve(poisson100, b, cfg=GmresConfig(max_iters=3))
    assert out.status is Status.DETECTOR_ABORT and out.iterations == 3
    assert len(out.detector_events) == 1
    assert tuple(out.detector_events[0].location) == (1, 4, 1)
    np.testing.assert_allclose(out.x, ref.x, rtol=1e-13, atol=1e-13)


def test_detector_abort_first_iteration_returns_x0(poisson100):
    det = DetectorConfig.for_matrix(poisson100)
    inj = FaultInjector(FaultSpec(1, 1, MgsPosition.FIRST, FaultClass.LARGE))
    out = gmres_solve(poisson100, np.ones(poisson100.nrows), cfg=GmresConfig(detector=det), injector=inj)
    assert out.status is Status.DETECTOR_ABORT and out.iterations == 0
    assert not np.any(out.x)


def test_detector_report_only_continues(poisson100):
    det = DetectorConfig.for_matrix(poisson100, DetectorAction.REPORT_ONLY)
    inj = FaultInjector(FaultSpec(1, 5, MgsPosition.FIRST, FaultClass.LARGE))
    out = gmres_solve(poisson100, np.ones(poisson100.nrows), cfg=GmresConfig(detector=det), injector=inj)
    # keeps going past the faulted iteration instead of aborting
    assert out.iterations >= 5 and out.status is not Status.DETECTOR_ABORT
    assert np.all(np.isfinite(out.x))
    assert out.detector_events and all(abs(e.observed) > e.bound for e in out.detector_events)


def test_detector_halt_raises(poisson100):
    det = DetectorConfig.for_matrix(poisson100, DetectorAction.HALT)
    inj = FaultInjector(FaultSpec(1, 2, MgsPosition.LAST, FaultClass.LARGE))
    with pytest.raises(SDCDetected) as err:
        gmres_solve(poisson100, np.ones(poisson100.nrows), cfg=GmresConfig(detector=det), injector=inj)
    assert tuple(err.value.event.location) == (1, 2, 2)


def test_numerical_breakdown_without_detector():
    # h = 1e200 times the class 1 multiplier overflows to inf
    inj = FaultInjector(FaultSpec(1, 1, MgsPosition.FIRST, FaultClass.LARGE))
    out = gmres_solve(lambda x: 1e200 * x, np.ones(4), injector=inj)
    assert out.status is Status.NUMERICAL_BREAKDOWN and out.iterations == 0
    np.testing.assert_array_equal(out.x, np.zeros(4))


def test_norms_do_not_overflow():
    b = np.array([1e200, 0.0, 0.0, 0.0])
    out = gmres_solve(identity(4), b)
    assert out.status is Status.HAPPY_BREAKDOWN
    np.testing.assert_allclose(out.x, b)


def test_input_validation():
    with pytest.raises(ValueError):
        gmres_solve(identity(3), np.array([1.0, np.nan, 0.0]))
    with pytest.raises(ValueError):
        gmres_solve(identity(3), np.ones(3), np.ones(2))
    with pytest.raises(ValueError):
        GmresConfig(max_iters=0)
    with pytest.raises(TypeError):
        as_operator(object())


def test_callable_operator_returning_input_does_not_corrupt_basis():
    out = gmres_solve(lambda x: x, np.ones(5))
    assert out.status is Status.HAPPY_BREAKDOWN
    np.testing.assert_allclose(out.x, np.ones(5))


def test_reconstruct_solution():
    rng = np.random.default_rng(2)
    qs = [rng.standard_normal(8) for _ in range(4)]
    f = HessenbergFactor(1.0)
    for k in range(3):
        f.absorb_column(rng.standard_normal(k + 2))
    x0 = rng.standard_normal(8)
    state = KrylovState(qs, f, 1.0, x0)
    np.testing.assert_array_equal(reconstruct_solution(state, np.zeros(3)), x0)
    y = rng.standard_normal(3)
    expected = x0 + np.column_stack(qs[:3]) @ y
    np.testing.assert_allclose(reconstruct_solution(state, y), expected, rtol=1e-14, atol=1e-14)
    with pytest.raises(ValueError):
        reconstruct_solution(state, np.zeros(4))


def test_reconstruct_single_column_identity():
    b = np.array([3.0, 4.0])
    beta = 5.0
    state = KrylovState([b / beta], HessenbergFactor(beta).absorb_column([1.0, 0.0]), beta, np.zeros(2))
    np.testing.assert_allclose(reconstruct_solution(state, [beta]), b)


def test_lsq_policy_svd_matches_standard():
    A = random_sparse(80, seed=9)
    b = np.ones(80)
    a = gmres_solve(A, b, cfg=GmresConfig(max_iters=20))
    s = gmres_solve(A, b, cfg=GmresConfig(max_iters=20, lsq_policy=LsqPolicy(LsqMode.ALWAYS_RANK_REVEALING)))
    np.testing.assert_allclose(a.x, s.x, rtol=1e-10, atol=1e-12)
