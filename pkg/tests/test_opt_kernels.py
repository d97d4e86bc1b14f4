import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kernel_cases import random_lp, random_qp
from oracles import brute_force_lp_min, brute_force_qp
from sensikit.errors import GuardExceededError, IndefiniteError, InfeasibleError
from sensikit.linalg import solve
from sensikit.lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, lp_kkt_residual, lp_solve
from sensikit.qp import QuadraticProgram, qp_kkt_residual, qp_solve
from sensikit.vertices import enumerate_vertices


def test_lp_bound_only():
    res = lp_solve(LinearProgram([1.0], lb=[0.0], ub=[1.0]))
    assert res.status == OPTIMAL
    assert res.x == pytest.approx([0.0])
    assert res.lower_duals == pytest.approx([1.0])


def test_lp_facet_optimum():
    res = lp_solve(LinearProgram([-1, -1], A_ineq=[[1, 1]], b_ineq=[1], lb=[0, 0]))
    assert res.objective == pytest.approx(-1.0)
    assert res.x.sum() == pytest.approx(1.0)
    assert res.ineq_duals == pytest.approx([1.0])


def test_lp_infeasible_and_unbounded():
    assert lp_solve(LinearProgram([1.0], A_ineq=[[1.0], [-1.0]], b_ineq=[-1.0, -1.0])).status == INFEASIBLE
    assert lp_solve(LinearProgram([-1.0], lb=[0.0])).status == UNBOUNDED


def test_lp_redundant_equalities():
    res = lp_solve(LinearProgram([1, 2], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2], lb=[0, 0]))
    assert res.x == pytest.approx([1.0, 0.0])
    assert res.kkt_residual <= 1e-8


def test_lp_upper_only_bounds_and_free_vars():
    res = lp_solve(LinearProgram([1.0, -1.0], A_eq=[[1.0, 1.0]], b_eq=[0.0], ub=[np.inf, 2.0]))
    assert res.x == pytest.approx([-2.0, 2.0])
    assert res.upper_duals[1] == pytest.approx(2.0)


def test_lp_degenerate_cycling_example():
    # Beale's example cycles under the textbook largest-coefficient rule
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    res = lp_solve(LinearProgram(c, A_ineq=A, b_ineq=b, lb=np.zeros(4)))
    assert res.objective == pytest.approx(-0.05)


def test_lp_matches_vertex_enumeration_random():
    rng = np.random.default_rng(11)
    compared = 0
    for _ in range(60):
        c, A, b, lp = random_lp(rng)
        res = lp_solve(lp)
        verts = enumerate_vertices(np.hstack([A, np.eye(len(b))]), b, range(A.shape[1] + len(b)))
        if res.status == UNBOUNDED:
            assert not verts.bounded
            continue
        assert res.status == OPTIMAL
        vmin = min(float(c @ v[: len(c)]) for v in verts)
        assert res.objective == pytest.approx(vmin, abs=1e-9)
        if verts.bounded:
            assert res.objective == pytest.approx(brute_force_lp_min(c, A, b), abs=1e-9)
        compared += 1
    assert compared > 20


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.permutations(range(8)))
def test_lp_objective_invariant_under_row_permutation(seed, perm):
    c, A, b, lp = random_lp(np.random.default_rng(seed))
    res = lp_solve(lp)
    perm = list(perm)
    res2 = lp_solve(LinearProgram(c, A_ineq=A[perm], b_ineq=b[perm], lb=np.zeros(len(c))))
    assert res.status == res2.status
    if res.status == OPTIMAL:
        assert abs(res.objective - res2.objective) <= 1e-9


def test_lp_duals_pass_independent_check():
    rng = np.random.default_rng(3)
    for _ in range(30):
        c, A, b, lp = random_lp(rng, n=4, m=5)
        res = lp_solve(lp)
        if res.status == OPTIMAL:
            assert lp_kkt_residual(lp, res.x, res.eq_duals, res.ineq_duals, res.lower_duals, res.upper_duals) <= 1e-8


def test_qp_projection():
    res = qp_solve(QuadraticProgram(np.eye(3), np.zeros(3), A_eq=[[1, 0, 0]], b_eq=[1]))
    assert res.x == pytest.approx([1, 0, 0])


def test_qp_active_bound():
    res = qp_solve(QuadraticProgram([[1.0]], [-1.0], A_ineq=[[1.0]], b_ineq=[0.0]))
    assert res.x == pytest.approx([0.0], abs=1e-12)
    assert res.ineq_multipliers == pytest.approx([1.0])
    assert res.working_set == [0]


def test_qp_matches_brute_force_random():
    rng = np.random.default_rng(5)
    for _ in range(150):
        H, q, A, b, qp = random_qp(rng)
        res = qp_solve(qp)
        ref = brute_force_qp(H, q, A, b)
        assert res.x == pytest.approx(ref, abs=1e-8)
        assert qp_kkt_residual(qp, res.x, res.eq_multipliers, res.ineq_multipliers) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_qp_equality_only_matches_kkt_solve(seed):
    rng = np.random.default_rng(seed)
    n, m = 4, int(rng.integers(1, 4))
    G = rng.normal(size=(n, n))
    H = G.T @ G + np.eye(n)
    q, A, b = rng.normal(size=n), rng.normal(size=(m, n)), rng.normal(size=m)
    res = qp_solve(QuadraticProgram(H, q, A_eq=A, b_eq=b))
    K = np.block([[H, A.T], [A, np.zeros((m, m))]])
    sol = solve(K, np.concatenate([-q, b]))
    assert np.max(np.abs(res.x - sol[:n])) <= 1e-9
    assert np.max(np.abs(res.eq_multipliers - sol[n:])) <= 1e-9


def test_qp_symmetrizes_H():
    qp = QuadraticProgram([[2.0, 1.0], [0.0, 2.0]], [0.0, 0.0])
    assert np.array_equal(qp.H, qp.H.T)


def test_qp_errors():
    with pytest.raises(IndefiniteError):
        qp_solve(QuadraticProgram([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0]))
    with pytest.raises(InfeasibleError):
        qp_solve(QuadraticProgram([[1.0]], [0.0], A_ineq=[[1.0], [-1.0]], b_ineq=[-1.0, -1.0]))


def test_qp_psd_zero_curvature():
    # H singular but bounded along the flat direction by a constraint
    res = qp_solve(QuadraticProgram([[1.0, 0.0], [0.0, 0.0]], [0.0, -1.0], A_ineq=[[0.0, 1.0]], b_ineq=[2.0]))
    assert res.x == pytest.approx([0.0, 2.0])
    assert res.ineq_multipliers == pytest.approx([1.0])


def test_vertices_segment_and_point():
    v = enumerate_vertices([[1.0, 1.0]], [1.0], [0, 1])
    assert [list(x) for x in v] == [[0.0, 1.0], [1.0, 0.0]]
    assert v.bounded and v.exhaustive
    v = enumerate_vertices([[1.0]], [3.0], [])
    assert [list(x) for x in v] == [[3.0]]


def test_vertices_p3_multiplier_polytope():
    # stationarity at x = 1, p = 2: x - p + z1 + z2 = 0
    v = enumerate_vertices([[1.0, 1.0]], [1.0], [0, 1])
    assert len(v) == 2


def test_vertices_guard():
    with pytest.raises(GuardExceededError):
        enumerate_vertices(np.ones((1, 21)), [1.0], range(21))


def test_vertices_empty_and_unbounded():
    assert len(enumerate_vertices([[1.0, 1.0]], [-1.0], [0, 1])) == 0
    v = enumerate_vertices([[1.0, -1.0]], [1.0], [0, 1])
    assert not v.bounded and len(v) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_vertices_are_extreme_points(seed):
    rng = np.random.default_rng(seed)
    m, d = int(rng.integers(1, 3)), int(rng.integers(2, 6))
    A = rng.uniform(0.1, 1.0, (m, d))
    b = rng.uniform(0.5, 1.5, m)
    verts = enumerate_vertices(A, b, range(d))
    for i, v in enumerate(verts):
        assert np.max(np.abs(A @ v - b)) <= 1e-8 and np.min(v) >= 0
        active = np.vstack([A, np.eye(d)[np.abs(v) <= 1e-9]])
        assert np.linalg.matrix_rank(active) == d
        for w in list(verts)[i + 1:]:
            assert np.max(np.abs(v - w)) > 1e-7
