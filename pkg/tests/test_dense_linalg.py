import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sensikit.errors import SingularMatrixError
from sensikit.linalg import lsqr_solve, lu_factor, lu_solve, null_space, qr_rank, rank


def test_identity_and_permutation():
    B = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(lu_solve(lu_factor(np.eye(3)), B), B)
    assert lu_solve(lu_factor([[0, 1], [1, 0]]), [1.0, 2.0]) == pytest.approx([2.0, 1.0])


def test_random_well_conditioned_residual():
    rng = np.random.default_rng(0)
    A = rng.uniform(-1, 1, (20, 20)) + 20 * np.eye(20)
    B = rng.normal(size=(20, 3))
    X = lu_solve(lu_factor(A), B)
    assert np.max(np.abs(A @ X - B)) <= 1e-10


def test_lu_reconstruction():
    import scipy.linalg as sla
    rng = np.random.default_rng(1)
    A = rng.uniform(-1, 1, (8, 8)) + 8 * np.eye(8)
    F = lu_factor(A)
    L = np.tril(F.lu, -1) + np.eye(8)
    U = np.triu(F.lu)
    PA = A.copy()
    for i, j in enumerate(F.piv):
        PA[[i, j]] = PA[[j, i]]
    assert np.max(np.abs(L @ U - PA)) <= 1e-10 * np.max(np.abs(A))
    assert sla.norm(A) > 0


def test_singular_pivot_reported():
    with pytest.raises(SingularMatrixError) as err:
        lu_factor([[1.0, 2.0], [2.0, 4.0]])
    assert err.value.pivot == 1


def test_rank_examples():
    assert rank([[1, 0], [0, 0]]) == 1
    assert rank([[1, 2], [1, 2]]) == 1
    assert rank(np.zeros((3, 2))) == 0
    rng = np.random.default_rng(2)
    A = rng.normal(size=(8, 3)) @ rng.normal(size=(3, 5))
    f, r = qr_rank(A)
    assert r == 3
    assert np.max(np.abs(f.Q.T @ f.Q - np.eye(8))) <= 1e-10
    d = np.abs(np.diag(f.R))
    assert np.all(d[:-1] >= d[1:] - 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_rank_invariant_under_column_permutation(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    A = rng.normal(size=(6, k)) @ rng.normal(size=(k, 5))
    assert rank(A) == rank(A[:, rng.permutation(5)]) == k


def test_null_space():
    Z = null_space(np.array([[1.0, 1.0]]))
    assert Z.shape == (2, 1)
    assert abs(Z[:, 0] @ [1.0, 1.0]) <= 1e-14


def test_lsqr_examples():
    x, ok, res = lsqr_solve([[1.0], [1.0]], [0.0, 2.0])
    assert ok and x == pytest.approx([1.0])
    x, ok, res = lsqr_solve(np.zeros((2, 2)), [1.0, 1.0])
    assert np.array_equal(x, np.zeros(2)) and res == pytest.approx(np.sqrt(2))


def test_lsqr_matches_lu_and_optimality():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(6, 6)) + 6 * np.eye(6)
    b = rng.normal(size=6)
    x, ok, _ = lsqr_solve(A, b, tol=1e-12)
    assert ok and np.max(np.abs(x - lu_solve(lu_factor(A), b))) <= 1e-8
    M = rng.normal(size=(10, 4))
    c = rng.normal(size=10)
    x, ok, res = lsqr_solve(M, c, tol=1e-10)
    r = M @ x - c
    assert np.linalg.norm(M.T @ r) <= 1e-10 * np.linalg.norm(M) * np.linalg.norm(r) * 10


def test_lsqr_consistent_system_iterations():
    rng = np.random.default_rng(5)
    U, _ = np.linalg.qr(rng.normal(size=(12, 12)))
    V, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    A = U[:, :8] @ np.diag(np.logspace(0, 4, 8)) @ V.T
    b = A @ rng.normal(size=8)
    x, ok, res = lsqr_solve(A, b, tol=1e-10, max_iter=4 * 12)
    assert res <= 1e-8 * np.linalg.norm(b)
