import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nusvqr.qp import (DenseQ, QpInfeasibleError, QpNonConvergenceError, QpProblem, SignedGram,
                       kkt_residual, solve_qp)
from oracles import enumerate_qp, enumerate_svqr_dual, grid_qp_1d

# fixed 4-variable instance with an active inequality; value from enumerate_qp
Q4 = np.array([[4.0, 1, 0, 1], [1, 3, 1, 0], [0, 1, 2, 0.5], [1, 0, 0.5, 2]])
C4 = np.array([-1.0, 2, -3, 0.5])
W4 = np.array([1.0, -1, 2, 0])
OPT4 = -0.08465401785714508


def _problem4():
    return QpProblem(Q4, C4, -np.ones(4), np.ones(4), np.ones(4), 0.5, W4, 0.25)


def _random_qp(rng, m, rank=None, ineq=True):
    A = rng.standard_normal((m, rank or m))
    lo = -rng.uniform(0.1, 2, m)
    hi = rng.uniform(0.1, 2, m)
    return QpProblem(A @ A.T, rng.standard_normal(m), lo, hi, rng.standard_normal(m), 0.0,
                     rng.standard_normal(m) if ineq else None, float(rng.uniform(0, 1)))


def _enum(p):
    return enumerate_qp(p.operator.toarray(), p.c, p.lower, p.upper, p.eq_coeffs, p.eq_rhs,
                        p.ineq_coeffs, p.ineq_rhs)[0]


def _svqr_problem(rng, l, nu_model):
    y = rng.normal(0, 1, l)
    X = rng.uniform(-3, 3, l)
    K = np.exp(-(X[:, None] - X[None, :]) ** 2)
    tau = float(rng.choice([0.2, 0.5, 0.8]))
    s = SignedGram.stacked(K)
    if nu_model:
        C, nu = float(rng.uniform(1, 20)), float(rng.uniform(0.05, 1))
        return QpProblem(s, np.r_[-y, y], np.zeros(2 * l),
                         np.r_[np.full(l, C * tau / l), np.full(l, C * (1 - tau) / l)],
                         np.r_[np.ones(l), -np.ones(l)], 0.0,
                         np.r_[np.full(l, 1 - tau), np.full(l, tau)], C * nu * tau * (1 - tau))
    C, eps = float(rng.uniform(0.1, 5)), float(rng.uniform(0, 0.5))
    return QpProblem(s, np.r_[-y + (1 - tau) * eps, y + tau * eps], np.zeros(2 * l),
                     np.r_[np.full(l, C * tau), np.full(l, C * (1 - tau))],
                     np.r_[np.ones(l), -np.ones(l)], 0.0)


def test_interior_minimum():
    p = QpProblem([[1.0]], [-1.0], [0.0], [2.0], [0.0], 0.0)
    sol = solve_qp(p)
    assert sol.z[0] == pytest.approx(1.0, abs=1e-10)
    assert sol.objective == pytest.approx(-0.5, abs=1e-12)


def test_clipped_minimum():
    sol = solve_qp(QpProblem([[1.0]], [-1.0], [0.0], [0.3], [0.0], 0.0))
    assert sol.z[0] == 0.3
    assert sol.objective == pytest.approx(grid_qp_1d(1.0, -1.0, 0.0, 0.3), abs=1e-9)


def test_frozen_four_variable_instance():
    sol = solve_qp(_problem4())
    assert sol.objective == pytest.approx(OPT4, abs=1e-9)
    assert sol.ineq_multiplier > 0
    assert W4 @ sol.z == pytest.approx(0.25, abs=1e-8)


def test_four_variable_instance_coarse_grid():
    # the grid can only overshoot the true minimum; resolution limits how close it gets
    g = np.arange(-1, 1.0001, 0.02)
    Z = np.array(np.meshgrid(g, g, g, indexing="ij")).reshape(3, -1).T
    z4 = 0.5 - Z.sum(axis=1)
    ok = (np.abs(z4) <= 1) & (Z @ W4[:3] <= 0.25)
    ZZ = np.column_stack([Z, z4])[ok]
    best = np.min(0.5 * np.einsum("ij,jk,ik->i", ZZ, Q4, ZZ) + ZZ @ C4)
    assert OPT4 <= best <= OPT4 + 0.02


def test_solution_invariants():
    p = _problem4()
    sol = solve_qp(p, tol=1e-9)
    assert np.all(sol.z >= p.lower - 1e-10) and np.all(sol.z <= p.upper + 1e-10)
    assert abs(p.eq_coeffs @ sol.z - p.eq_rhs) <= 1e-8 * (1 + abs(p.eq_rhs))
    assert p.ineq_rhs - p.ineq_coeffs @ sol.z >= -1e-8
    assert sol.kkt_residual <= 1e-9
    assert sol.kkt_residual == kkt_residual(p, sol.z, sol.eq_multiplier, sol.ineq_multiplier)


def test_certificate_rejects_wrong_multiplier():
    p = _problem4()
    sol = solve_qp(p)
    assert kkt_residual(p, sol.z, sol.eq_multiplier + 0.1, sol.ineq_multiplier) > 1e-3
    assert kkt_residual(p, sol.z, sol.eq_multiplier, -1.0) > 0.5


def test_deterministic():
    rng = np.random.default_rng(7)
    p = _svqr_problem(rng, 30, True)
    a, b = solve_qp(p), solve_qp(p)
    assert a.z.tobytes() == b.z.tobytes() and a.eq_multiplier == b.eq_multiplier


def test_infeasible():
    p = QpProblem([[1.0, 0], [0, 1]], [0, 0], [0, 0], [1, 1], [1, 1], 5.0)
    with pytest.raises(QpInfeasibleError):
        solve_qp(p)


def test_parallel_inequality_contradiction():
    p = QpProblem(np.eye(2), [0, 0], [0, 0], [1, 1], [1, 1], 1.0, [2, 2], 1.0)
    with pytest.raises(QpInfeasibleError):
        solve_qp(p)


def test_parallel_inequality_redundant():
    p = QpProblem(np.eye(2), [-1, -1], [0, 0], [1, 1], [1, 1], 1.0, [2, 2], 3.0)
    assert solve_qp(p).z == pytest.approx([0.5, 0.5])


def test_nonconvergence_carries_iterate():
    p = _svqr_problem(np.random.default_rng(1), 40, True)
    with pytest.raises(QpNonConvergenceError) as exc:
        solve_qp(p, max_iter=2)
    assert exc.value.z is not None and exc.value.residual > 0


def test_bad_tolerance():
    with pytest.raises(ValueError):
        solve_qp(_problem4(), tol=0)


@pytest.mark.parametrize("bad", [
    dict(Q=[[1.0, 2.0], [0.0, 1.0]]),
    dict(lower=[1.0, 0.0]),
    dict(eq_coeffs=[1.0]),
])
def test_problem_validation(bad):
    kw = dict(Q=np.eye(2), c=[0.0, 0.0], lower=[0.0, 0.0], upper=[0.5, 0.5], eq_coeffs=[1.0, 1.0])
    kw.update(bad)
    with pytest.raises(ValueError):
        QpProblem(**kw)


def test_psd_check():
    p = QpProblem([[1.0, 2.0], [2.0, 1.0]], [0, 0], [0, 0], [1, 1], [1, 1])
    with pytest.raises(ValueError):
        p.check_psd()


def test_signed_gram_matches_dense():
    rng = np.random.default_rng(2)
    X = rng.normal(size=5)
    K = np.exp(-(X[:, None] - X[None, :]) ** 2)
    s = SignedGram.stacked(K)
    D = np.block([[K, -K], [-K, K]])
    np.testing.assert_array_equal(s.toarray(), D)
    z = rng.normal(size=10)
    np.testing.assert_allclose(s.matvec(z), D @ z, atol=1e-14)
    np.testing.assert_array_equal(s.column(7), D[7])
    idx = np.array([0, 6, 3])
    np.testing.assert_array_equal(s.submatrix(idx), D[np.ix_(idx, idx)])
    np.testing.assert_array_equal(DenseQ(D).submatrix(idx), D[np.ix_(idx, idx)])
    perm = rng.permutation(10)
    np.testing.assert_array_equal(s.permuted(perm).toarray(), D[np.ix_(perm, perm)])


def test_methods_agree():
    p = _svqr_problem(np.random.default_rng(4), 12, True)
    a = solve_qp(p, method="smo")
    b = solve_qp(p, method="active_set")
    assert a.objective == pytest.approx(b.objective, abs=1e-8)


def test_singular_gram_duplicate_points():
    l = 6
    K = np.ones((l, l))
    y = np.arange(l, dtype=float)
    p = QpProblem(SignedGram.stacked(K), np.r_[-y, y], np.zeros(2 * l), np.full(2 * l, 0.5),
                  np.r_[np.ones(l), -np.ones(l)], 0.0)
    sol = solve_qp(p)
    assert sol.objective == pytest.approx(_enum(QpProblem(
        p.operator.toarray(), p.c, p.lower, p.upper, p.eq_coeffs)), abs=1e-8)


def test_newton_phase_preserves_feasibility_and_descends():
    smo_mod = sys.modules["nusvqr.qp.smo"]
    rng = np.random.default_rng(0)
    l = 8
    y = rng.normal(size=l)
    X = rng.uniform(-3, 3, l)
    K = np.exp(-(X[:, None] - X[None, :]) ** 2)
    op = SignedGram.stacked(K)
    c = np.r_[-y, y]
    t = np.r_[np.ones(l), -np.ones(l)]
    # tau = 0.5: equal boxes, so the box centre has zero scaled sum
    ulo = np.r_[np.zeros(l), -np.ones(l)]
    uhi = np.r_[np.ones(l), np.zeros(l)]
    u = 0.5 * (ulo + uhi)
    G = op.matvec(u / t) + c
    obj = lambda v: 0.5 * (v / t) @ op.matvec(v / t) + c @ (v / t)
    u2, status = smo_mod._newton_step(op, u, t, G, ulo, uhi, [slice(0, 2 * l)])
    assert status in (1, 2)
    assert abs(u2.sum() - u.sum()) <= 1e-12
    assert np.all(u2 >= ulo) and np.all(u2 <= uhi)
    assert obj(u2) < obj(u)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.booleans(), st.booleans())
def test_matches_enumeration(seed, m, ineq, low_rank):
    rng = np.random.default_rng(seed)
    rank = max(1, m - 2) if low_rank else None
    p = _random_qp(rng, m, rank, ineq)
    sol = solve_qp(p, tol=1e-10)
    assert sol.objective == pytest.approx(_enum(p), abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.booleans())
def test_svqr_duals_match_enumeration(seed, l, nu_model):
    p = _svqr_problem(np.random.default_rng(seed), l, nu_model)
    sol = solve_qp(p)
    ref, _ = enumerate_svqr_dual(p.operator.toarray(), p.c, p.lower, p.upper, p.eq_coeffs,
                                 p.eq_rhs, p.ineq_coeffs, p.ineq_rhs)
    assert sol.objective == pytest.approx(ref, abs=1e-6)
    assert sol.objective <= p.objective(np.zeros(2 * l)) + 1e-12


def test_svqr_oracle_agrees_with_general_oracle():
    p = _svqr_problem(np.random.default_rng(9), 3, True)
    Q = p.operator.toarray()
    a, _ = enumerate_svqr_dual(Q, p.c, p.lower, p.upper, p.eq_coeffs, p.eq_rhs, p.ineq_coeffs,
                               p.ineq_rhs)
    b, _ = enumerate_qp(Q, p.c, p.lower, p.upper, p.eq_coeffs, p.eq_rhs, p.ineq_coeffs, p.ineq_rhs)
    assert a == pytest.approx(b, abs=1e-12)
