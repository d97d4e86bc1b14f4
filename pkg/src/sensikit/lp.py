"""Two-phase revised simplex with Bland's anti-cycling rule."""

from dataclasses import dataclass, field

import numpy as np

from .errors import CyclingError, KKTCheckError
from .linalg import lu_factor, lu_solve

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"
KKT_TOL = 1e-8


def _mat(A, cols):
    if A is None:
        return np.zeros((0, cols))
    A = np.asarray(A, dtype=float)
    return A.reshape(-1, cols)


def _vec(b, rows):
    if b is None:
        return np.zeros(rows)
    return np.asarray(b, dtype=float).reshape(rows)


@dataclass(frozen=True)
class LinearProgram:
    """min c'x s.t. A_eq x = b_eq, A_ineq x <= b_ineq, lb <= x <= ub.

    Variables are free unless bounds are given.
    """

    c: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ineq: np.ndarray = None
    b_ineq: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A_eq = _mat(self.A_eq, n)
        A_in = _mat(self.A_ineq, n)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_eq", _vec(self.b_eq, A_eq.shape[0]))
        object.__setattr__(self, "A_ineq", A_in)
        object.__setattr__(self, "b_ineq", _vec(self.b_ineq, A_in.shape[0]))
        lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(n)
        ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(n)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def n(self):
        return self.c.size


@dataclass
class LPResult:
    status: str
    x: np.ndarray = None
    objective: float = None
    eq_duals: np.ndarray = None
    ineq_duals: np.ndarray = None
    lower_duals: np.ndarray = None
    upper_duals: np.ndarray = None
    basis: list = field(default_factory=list)
    iterations: int = 0
    kkt_residual: float = None

    def __iter__(self):
        duals = {"eq": self.eq_duals, "ineq": self.ineq_duals,
                 "lower": self.lower_duals, "upper": self.upper_duals}
        return iter((self.status, self.x, duals, self.basis))


def lp_kkt_residual(lp, x, eq, ineq, lower, upper):
    """Largest violation among feasibility, stationarity, sign and complementarity.

    Stationarity convention: c + A_eq' eq + A_ineq' ineq - lower + upper = 0,
    every inequality-type multiplier nonnegative.
    """
    lo_fin = np.isfinite(lp.lb)
    up_fin = np.isfinite(lp.ub)
    parts = [0.0]
    if lp.A_eq.shape[0]:
        parts.append(np.max(np.abs(lp.A_eq @ x - lp.b_eq)))
    if lp.A_ineq.shape[0]:
        slack = lp.b_ineq - lp.A_ineq @ x
        parts.append(max(0.0, -np.min(slack)))
        parts.append(max(0.0, -np.min(ineq)))
        parts.append(np.max(np.abs(ineq * slack)))
    if lo_fin.any():
        s = x[lo_fin] - lp.lb[lo_fin]
        parts += [max(0.0, -np.min(s)), max(0.0, -np.min(lower[lo_fin])), np.max(np.abs(lower[lo_fin] * s))]
    if up_fin.any():
        s = lp.ub[up_fin] - x[up_fin]
        parts += [max(0.0, -np.min(s)), max(0.0, -np.min(upper[up_fin])), np.max(np.abs(upper[up_fin] * s))]
    parts.append(np.max(np.abs(lower[~lo_fin]), initial=0.0))
    parts.append(np.max(np.abs(upper[~up_fin]), initial=0.0))
    stat = lp.c + lp.A_eq.T @ eq + lp.A_ineq.T @ ineq - lower + upper
    parts.append(np.max(np.abs(stat), initial=0.0))
    return float(max(parts))


class _Standard:
    """min ct'xi s.t. At xi = bt, xi >= 0 built from a LinearProgram."""

    def __init__(self, lp):
        n = lp.n
        cols, shift, labels = [], np.zeros(n), []
        self.upper_rows = []
        for j in range(n):
            lo, hi = lp.lb[j], lp.ub[j]
            if np.isfinite(lo):
                shift[j] = lo
                cols.append((j, 1.0))
                labels.append(f"x{j + 1}")
                if np.isfinite(hi):
                    self.upper_rows.append((len(cols) - 1, hi - lo, j))
            elif np.isfinite(hi):
                shift[j] = hi
                cols.append((j, -1.0))
                labels.append(f"x{j + 1}")
            else:
                cols.append((j, 1.0))
                labels.append(f"x{j + 1}+")
                cols.append((j, -1.0))
                labels.append(f"x{j + 1}-")
        k = len(cols)
        T = np.zeros((n, k))
        for col, (j, s) in enumerate(cols):
            T[j, col] = s
        m_eq, m_in, m_up = lp.A_eq.shape[0], lp.A_ineq.shape[0], len(self.upper_rows)
        n_slack = m_in + m_up
        A = np.zeros((m_eq + m_in + m_up, k + n_slack))
        b = np.zeros(m_eq + m_in + m_up)
        A[:m_eq, :k] = lp.A_eq @ T
        b[:m_eq] = lp.b_eq - lp.A_eq @ shift
        A[m_eq:m_eq + m_in, :k] = lp.A_ineq @ T
        A[m_eq:m_eq + m_in, k:k + m_in] = np.eye(m_in)
        b[m_eq:m_eq + m_in] = lp.b_ineq - lp.A_ineq @ shift
        for r, (col, width, _) in enumerate(self.upper_rows):
            A[m_eq + m_in + r, col] = 1.0
            A[m_eq + m_in + r, k + m_in + r] = 1.0
            b[m_eq + m_in + r] = width
        labels += [f"s_ineq{i + 1}" for i in range(m_in)]
        labels += [f"s_upper{j + 1}" for _, _, j in self.upper_rows]
        self.sign = np.where(b < 0, -1.0, 1.0)
        self.A = A * self.sign[:, None]
        self.b = b * self.sign
        self.c = np.concatenate([T.T @ lp.c, np.zeros(n_slack)])
        self.T, self.shift, self.k = T, shift, k
        self.labels = labels
        self.m_eq, self.m_in = m_eq, m_in

    def x_of(self, xi):
        return self.T @ xi[: self.k] + self.shift


def _revised_simplex(A, b, c, basis, allowed, max_iter, tol=1e-10):
    """Bland's rule iterations from a feasible basis. Returns (status, basis, iters)."""
    m, N = A.shape
    basis = list(basis)
    for it in range(max_iter):
        if m == 0:
            neg = [j for j in range(N) if allowed[j] and c[j] < -tol]
            return (UNBOUNDED if neg else OPTIMAL), basis, it
        F = lu_factor(A[:, basis], tau=1e-13)
        xB = lu_solve(F, b)
        pi = lu_solve(F, c[basis], trans=True)
        r = c - A.T @ pi
        in_basis = set(basis)
        scale = 1.0 + np.max(np.abs(c))
        enter = next((j for j in range(N) if allowed[j] and j not in in_basis and r[j] < -tol * scale), None)
        if enter is None:
            return OPTIMAL, basis, it
        d = lu_solve(F, A[:, enter])
        best, leave = np.inf, None
        for i in range(m):
            if d[i] > tol:
                ratio = max(xB[i], 0.0) / d[i]
                if ratio < best - 1e-14 or (abs(ratio - best) <= 1e-14 and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return UNBOUNDED, basis, it
        basis[leave] = enter
    raise CyclingError(f"simplex exceeded {max_iter} iterations")


def lp_solve(lp, check=True):
    """Solve a :class:`LinearProgram`; returns an :class:`LPResult`."""
    std = _Standard(lp)
    A, b, c = std.A, std.b, std.c
    m, N = A.shape
    max_iter = 50 * (m + N) + 1000

    # phase 1 with one artificial per row
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(N), np.ones(m)])
    allowed = np.ones(N + m, dtype=bool)
    status, basis, it1 = _revised_simplex(A1, b, c1, list(range(N, N + m)), allowed, max_iter)
    xB = lu_solve(lu_factor(A1[:, basis], tau=1e-13), b) if m else np.zeros(0)
    infeas = float(sum(xB[i] for i, j in enumerate(basis) if j >= N))
    if infeas > 1e-9 * (1.0 + np.max(np.abs(b), initial=0.0)):
        return LPResult(INFEASIBLE, iterations=it1)

    # drive artificials out; rows where that is impossible are redundant
    rows = list(range(m))
    i = 0
    while i < len(basis):
        if basis[i] < N:
            i += 1
            continue
        Ar = A1[np.ix_(rows, range(N + m))]
        F = lu_factor(Ar[:, basis], tau=1e-13)
        e = np.zeros(len(rows))
        e[i] = 1.0
        row = lu_solve(F, e, trans=True) @ Ar[:, :N]
        in_basis = set(basis)
        cand = next((j for j in range(N) if j not in in_basis and abs(row[j]) > 1e-9), None)
        if cand is not None:
            basis[i] = cand
            i += 1
        else:
            del rows[i]
            del basis[i]
    A2, b2 = A[rows], b[rows]
    status, basis, it2 = _revised_simplex(A2, b2, c, basis, np.ones(N, dtype=bool), max_iter)
    iters = it1 + it2
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, iterations=iters)

    xi = np.zeros(N)
    pi_rows = np.zeros(m)
    if rows:
        F = lu_factor(A2[:, basis], tau=1e-13)
        xi[basis] = np.maximum(lu_solve(F, b2), 0.0)
        pi_rows[rows] = lu_solve(F, c[basis], trans=True)
    x = std.x_of(xi)
    pi = pi_rows * std.sign
    m_eq, m_in = std.m_eq, std.m_in
    eq = -pi[:m_eq]
    ineq = -pi[m_eq:m_eq + m_in]
    upper = np.zeros(lp.n)
    for r, (_, _, j) in enumerate(std.upper_rows):
        upper[j] = -pi[m_eq + m_in + r]
    # remaining bound multipliers close stationarity on bounded coordinates
    rho = lp.c + lp.A_eq.T @ eq + lp.A_ineq.T @ ineq + upper
    lower = np.zeros(lp.n)
    lo_fin, up_fin = np.isfinite(lp.lb), np.isfinite(lp.ub)
    lower[lo_fin] = rho[lo_fin]
    only_up = up_fin & ~lo_fin
    upper[only_up] = -rho[only_up]
    lower[only_up] = 0.0
    ineq = np.maximum(ineq, 0.0) if m_in else ineq
    res = LPResult(OPTIMAL, x, float(lp.c @ x), eq, ineq, lower, upper,
                   [std.labels[j] for j in sorted(basis)], iters)
    res.kkt_residual = lp_kkt_residual(lp, x, eq, ineq, lower, upper)
    if check and res.kkt_residual > KKT_TOL * _scale(lp):
        raise KKTCheckError(f"LP solution failed the KKT check (residual {res.kkt_residual:.3e})")
    return res


def _scale(lp):
    data = [np.abs(lp.c), np.abs(lp.A_eq), np.abs(lp.A_ineq), np.abs(lp.b_eq), np.abs(lp.b_ineq)]
    return 1.0 + max((float(np.max(d)) for d in data if d.size), default=0.0)
