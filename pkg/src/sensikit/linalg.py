"""Dense factorization kernels: pivoted LU, rank-revealing QR, LSQR."""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import lsqr

from .errors import SingularMatrixError

TAU_RANK = 1e-8


@dataclass(frozen=True)
class LUFactors:
    lu: np.ndarray
    piv: np.ndarray
    shape: tuple


@dataclass(frozen=True)
class QRFactors:
    Q: np.ndarray
    R: np.ndarray
    perm: np.ndarray
    rank: int
    tau: float


def as_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise ValueError("expected a 2-D array")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def lu_factor(A, tau=TAU_RANK):
    """P A = L U with partial pivoting; raises on numerical singularity."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"LU needs a square matrix, got {A.shape}")
    n = A.shape[0]
    if n == 0:
        return LUFactors(A.copy(), np.zeros(0, dtype=int), A.shape)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    bad = np.nonzero(diag <= tau * scale)[0]
    if bad.size:
        raise SingularMatrixError(f"matrix is singular at pivot {int(bad[0])}", pivot=int(bad[0]))
    return LUFactors(lu, piv, A.shape)


def lu_solve(F, B, trans=False):
    """Solve A X = B (or A^T X = B) with precomputed factors."""
    B = np.asarray(B, dtype=float)
    if F.shape[0] == 0:
        return B.copy()
    return sla.lu_solve((F.lu, F.piv), B, trans=1 if trans else 0, check_finite=False)


def solve(A, B):
    return lu_solve(lu_factor(A), B)


def qr_rank(A, tau=TAU_RANK):
    """Column-pivoted QR; rank counts |R_ii| > tau * |R_00|."""
    A = as_matrix(A)
    m, n = A.shape
    if m == 0 or n == 0:
        return QRFactors(np.eye(m), np.zeros((m, n)), np.arange(n), 0, tau), 0
    Q, R, perm = sla.qr(A, pivoting=True, mode="full", check_finite=False)
    d = np.abs(np.diag(R))
    rank = 0 if d[0] == 0.0 else int(np.sum(d > tau * d[0]))
    return QRFactors(Q, R, perm, rank, tau), rank


def rank(A, tau=TAU_RANK):
    return qr_rank(A, tau)[1]


def null_space(A, n=None, tau=TAU_RANK):
    """Orthonormal basis (as columns) of the null space of A."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        cols = A.shape[1] if A.ndim == 2 else n
        return np.eye(cols)
    A = as_matrix(A)
    f, r = qr_rank(A.T, tau)
    # trailing columns of Q from the pivoted QR of A^T span null(A)
    return f.Q[:, r:]


def independent_rows(A, tau=TAU_RANK):
    """Indices of a maximal linearly independent subset of rows of A, sorted."""
    A = np.asarray(A, dtype=float)
    if A.shape[0] == 0:
        return []
    f, r = qr_rank(A.T, tau)
    return sorted(int(i) for i in f.perm[:r])


def lsqr_solve(A, b, tol=1e-10, max_iter=None):
    """Least-squares solve; returns (x, converged, residual_norm)."""
    A = as_matrix(A)
    b = np.asarray(b, dtype=float).reshape(-1)
    if max_iter is None:
        max_iter = 4 * max(A.shape)
    if not np.any(A):
        return np.zeros(A.shape[1]), True, float(np.linalg.norm(b))
    out = lsqr(A, b, atol=tol, btol=tol, iter_lim=max_iter)
    x, istop = out[0], out[1]
    res = float(np.linalg.norm(A @ x - b))
    return x, istop in (0, 1, 2, 4, 5), res
