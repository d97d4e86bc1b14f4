"""Seeded random LP and QP instances shared by kernel and acceptance tests."""

import numpy as np

from sensikit.lp import LinearProgram
from sensikit.qp import QuadraticProgram


def random_lp(rng, n=6, m=8):
    """min c'x s.t. A x <= b, x >= 0 with x = 0 feasible."""
    A = rng.uniform(-1.0, 1.0, (m, n))
    b = rng.uniform(0.2, 2.0, m)
    c = rng.uniform(-1.0, 1.0, n)
    return c, A, b, LinearProgram(c, A_ineq=A, b_ineq=b, lb=np.zeros(n))


def random_qp(rng, n=None, m=None):
    n = n or int(rng.integers(1, 6))
    m = m if m is not None else int(rng.integers(0, 7))
    G = rng.normal(size=(n, n))
    H = G.T @ G + np.eye(n)
    q = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    b = A @ x0 + rng.uniform(0.0, 1.0, m)
    return H, q, A, b, QuadraticProgram(H, q, A_ineq=A, b_ineq=b)
