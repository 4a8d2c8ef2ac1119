"""ADMM QP solver: analytic cases, oracle comparisons, certificates, I/O."""

import numpy as np
import pytest
import scipy.sparse as sp

from se3mpc.qp import (
    INF,
    DimensionMismatch,
    QpProblem,
    QpSettings,
    QpSolution,
    dump,
    load,
    solve,
    warm_start,
)


def make_problem(P, q, A, l, u):
    return QpProblem(P=sp.csc_matrix(P), q=np.asarray(q, float),
                     A=sp.csc_matrix(A), l=np.asarray(l, float),
                     u=np.asarray(u, float))


def random_eq_qp(rng, n):
    """Strictly convex QP with m_eq <= n//2 equality constraints."""
    m = rng.integers(1, max(2, n // 2) + 1)
    M = rng.standard_normal((n, n))
    P = M @ M.T + n * np.eye(n)
    q = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    return make_problem(P, q, A, b, b), P, q, A, b


def kkt_oracle(P, q, A, b):
    n, m = P.shape[0], A.shape[0]
    K = np.block([[P, A.T], [A, np.zeros((m, m))]])
    sol = np.linalg.solve(K, np.concatenate([-q, b]))
    return sol[:n]


def test_validation():
    with pytest.raises(ValueError):
        make_problem(np.array([[1.0, 2.0], [0.0, 1.0]]), [0, 0],
                     np.eye(2), [0, 0], [1, 1])
    with pytest.raises(ValueError):
        make_problem(np.eye(2), [0, 0], np.eye(2), [1, 1], [0, 0])
    with pytest.raises(DimensionMismatch):
        make_problem(np.eye(2), [0, 0, 0], np.eye(2), [0, 0], [1, 1])


def test_simple_bound():
    # min 0.5 x^2 s.t. x >= 1 -> x*=1, y*=-1
    p = make_problem([[1.0]], [0.0], [[1.0]], [1.0], [INF])
    sol = solve(p)
    assert sol.status == "Solved"
    assert abs(sol.z[0] - 1.0) < 1e-6
    assert abs(sol.y[0] + 1.0) < 1e-6


def test_clipped_optimum():
    # min 0.5||z||^2 - z1 with |z1| <= 0.5
    n = 4
    A = np.zeros((1, n))
    A[0, 0] = 1.0
    q = np.zeros(n)
    q[0] = -1.0
    p = make_problem(np.eye(n), q, A, [-0.5], [0.5])
    sol = solve(p)
    assert sol.status == "Solved"
    want = np.zeros(n)
    want[0] = 0.5
    assert np.abs(sol.z - want).max() < 1e-6


def test_equality_qps_match_kkt_oracle():
    rng = np.random.default_rng(4242)
    for _ in range(100):
        n = int(rng.integers(2, 51))
        p, P, q, A, b = random_eq_qp(rng, n)
        sol = solve(p)
        assert sol.status == "Solved"
        z_star = kkt_oracle(P, q, A, b)
        assert np.abs(sol.z - z_star).max() < 1e-6


def test_objective_scaling_invariance():
    rng = np.random.default_rng(55)
    p, P, q, A, b = random_eq_qp(rng, 12)
    z1 = solve(p).z
    p2 = make_problem(7.5 * P, 7.5 * q, A, b, b)
    z2 = solve(p2).z
    assert np.abs(z1 - z2).max() < 1e-6


def test_solution_beats_random_feasible_points():
    rng = np.random.default_rng(66)
    n = 10
    M = rng.standard_normal((n, n))
    P = M @ M.T + n * np.eye(n)
    q = rng.standard_normal(n)
    # box-only problem so feasible samples are easy to draw
    p = make_problem(P, q, np.eye(n), -np.ones(n), np.ones(n))
    sol = solve(p)
    assert sol.status == "Solved"
    f_star = p.objective(sol.z)
    for _ in range(1000):
        z = rng.uniform(-1, 1, n)
        assert f_star <= p.objective(z) + 1e-9


def test_primal_infeasibility_certificate():
    # x = 0 and x = 1 simultaneously
    p = make_problem(np.eye(1), [0.0], [[1.0], [1.0]], [0.0, 1.0], [0.0, 1.0])
    sol = solve(p)
    assert sol.status == "PrimalInfeasible"


def test_dual_infeasibility_certificate():
    # unbounded below: no curvature along z2, linear cost pushes forever
    P = np.diag([1.0, 0.0])
    A = np.array([[1.0, 0.0]])
    p = make_problem(P, [0.0, -1.0], A, [-1.0], [1.0])
    sol = solve(p)
    assert sol.status == "DualInfeasible"


def test_max_iter_returns_best_iterate():
    rng = np.random.default_rng(9)
    p, *_ = random_eq_qp(rng, 30)
    sol = solve(p, QpSettings(max_iter=3, check_interval=1, polish=False))
    assert sol.status == "MaxIter"
    assert np.all(np.isfinite(sol.z))


def test_determinism():
    rng = np.random.default_rng(123)
    p, *_ = random_eq_qp(rng, 20)
    a = solve(p, QpSettings())
    b = solve(p, QpSettings())
    assert np.array_equal(a.z, b.z)
    assert np.array_equal(a.y, b.y)
    assert a.iterations == b.iterations


def test_polish_tightens_residuals():
    rng = np.random.default_rng(31)
    p, P, q, A, b = random_eq_qp(rng, 25)
    rough = solve(p, QpSettings(polish=False))
    tight = solve(p, QpSettings(polish=True))
    assert tight.polished
    assert max(tight.prim_res, tight.dual_res) <= max(rough.prim_res, rough.dual_res)
    z_star = kkt_oracle(P, q, A, b)
    assert np.abs(tight.z - z_star).max() < 1e-9


def test_warm_start_shift():
    nx, nu, N = 2, 1, 3
    z = np.arange(N * (nx + nu), dtype=float)
    y = np.arange(N * nx, dtype=float)
    prev = QpSolution(z=z, y=y, status="Solved", prim_res=0, dual_res=0,
                      iterations=1, objective=0.0)
    wz, wy = warm_start(prev, nx, nu, N, n_in_per_step=0)
    # state block shifted by one step, tail repeated
    assert np.array_equal(wz[:nx], z[nx:2 * nx])
    assert np.array_equal(wz[(N - 1) * nx: N * nx], z[(N - 1) * nx: N * nx])
    # input block likewise
    u = z[N * nx:]
    assert np.array_equal(wz[N * nx: N * nx + nu], u[nu:2 * nu])
    assert wz.shape == z.shape and wy.shape == y.shape
    with pytest.raises(DimensionMismatch):
        warm_start(prev, nx + 1, nu, N)


def test_warm_start_zero_equals_cold():
    rng = np.random.default_rng(88)
    p, *_ = random_eq_qp(rng, 15)
    cold = solve(p, QpSettings())
    warm = solve(p, QpSettings(warm_z=np.zeros(p.n), warm_y=np.zeros(p.m)))
    assert np.array_equal(cold.z, warm.z)
    assert cold.iterations == warm.iterations


def test_warm_start_saves_iterations_on_repeat():
    rng = np.random.default_rng(91)
    p, *_ = random_eq_qp(rng, 30)
    first = solve(p, QpSettings(polish=False))
    again = solve(p, QpSettings(polish=False, warm_z=first.z, warm_y=first.y))
    assert again.iterations <= first.iterations


def test_dump_load_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    p, *_ = random_eq_qp(rng, 8)
    path = tmp_path / "problem.qpdump"
    dump(p, path)
    q2 = load(path)
    assert np.abs((p.P - q2.P).toarray()).max() == 0.0
    assert np.abs((p.A - q2.A).toarray()).max() == 0.0
    assert np.array_equal(p.q, q2.q)
    assert np.array_equal(p.l, q2.l)
    assert np.array_equal(p.u, q2.u)
    assert np.array_equal(solve(p).z, solve(q2).z)
