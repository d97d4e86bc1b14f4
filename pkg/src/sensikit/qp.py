"""Primal active-set method for convex quadratic programs."""

from dataclasses import dataclass, field

import numpy as np

from .errors import (CyclingError, IndefiniteError, InfeasibleError, KKTCheckError,
                     SingularMatrixError, UnboundedError)
from .linalg import independent_rows, lu_factor, lu_solve, null_space
from .lp import INFEASIBLE, OPTIMAL, LinearProgram, _mat, _vec, lp_solve

KKT_TOL = 1e-8
_TOL = 1e-11


@dataclass(frozen=True)
class QuadraticProgram:
    """min 0.5 x'Hx + q'x s.t. A_eq x = b_eq, A_ineq x <= b_ineq."""

    H: np.ndarray
    q: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ineq: np.ndarray = None
    b_ineq: np.ndarray = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = H.shape[0]
        if H.shape != (n, n):
            raise ValueError("H must be square")
        object.__setattr__(self, "H", 0.5 * (H + H.T))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(n))
        A_eq = _mat(self.A_eq, n)
        A_in = _mat(self.A_ineq, n)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_eq", _vec(self.b_eq, A_eq.shape[0]))
        object.__setattr__(self, "A_ineq", A_in)
        object.__setattr__(self, "b_ineq", _vec(self.b_ineq, A_in.shape[0]))

    @property
    def n(self):
        return self.q.size


@dataclass
class QPResult:
    status: str
    x: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    working_set: list = field(default_factory=list)
    iterations: int = 0
    kkt_residual: float = 0.0

    def __iter__(self):
        mult = {"eq": self.eq_multipliers, "ineq": self.ineq_multipliers}
        return iter((self.status, self.x, mult, self.working_set))


def qp_kkt_residual(qp, x, lam, mu):
    """Stationarity Hx + q + A_eq'lam + A_ineq'mu = 0 plus feasibility, sign, complementarity."""
    parts = [np.max(np.abs(qp.H @ x + qp.q + qp.A_eq.T @ lam + qp.A_ineq.T @ mu), initial=0.0)]
    if qp.A_eq.shape[0]:
        parts.append(np.max(np.abs(qp.A_eq @ x - qp.b_eq)))
    if qp.A_ineq.shape[0]:
        slack = qp.b_ineq - qp.A_ineq @ x
        parts += [max(0.0, -np.min(slack)), max(0.0, -np.min(mu)), np.max(np.abs(mu * slack))]
    return float(max(parts))


def _scale(qp):
    data = [qp.H, qp.q, qp.A_eq, qp.b_eq, qp.A_ineq, qp.b_ineq]
    return 1.0 + max((float(np.max(np.abs(d))) for d in data if d.size), default=0.0)


def _feasible_start(qp, x0):
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(qp.n)
        ok = np.all(np.abs(qp.A_eq @ x0 - qp.b_eq) <= 1e-9) and np.all(qp.A_ineq @ x0 - qp.b_ineq <= 1e-9)
        if ok:
            return x0
    res = lp_solve(LinearProgram(np.zeros(qp.n), qp.A_eq, qp.b_eq, qp.A_ineq, qp.b_ineq))
    if res.status == INFEASIBLE:
        # report the row that a least-squares fit violates most
        A = np.vstack([qp.A_eq, qp.A_ineq])
        b = np.concatenate([qp.b_eq, qp.b_ineq])
        xs = np.linalg.lstsq(A, b, rcond=None)[0]
        viol = np.concatenate([np.abs(qp.A_eq @ xs - qp.b_eq), np.maximum(qp.A_ineq @ xs - qp.b_ineq, 0.0)])
        k = int(np.argmax(viol))
        kind = f"eq row {k}" if k < qp.A_eq.shape[0] else f"ineq row {k - qp.A_eq.shape[0]}"
        raise InfeasibleError(f"QP constraints are infeasible (most violated: {kind})")
    return res.x


def _step(H, g, A_W):
    """Minimizer step of the equality subproblem, or a descent ray.

    Returns (p, is_ray). Raises IndefiniteError on negative reduced curvature.
    """
    n = H.shape[0]
    Z = null_space(A_W, n) if A_W.shape[0] else np.eye(n)
    if Z.shape[1] == 0:
        return np.zeros(n), False
    Hr = Z.T @ H @ Z
    Hr = 0.5 * (Hr + Hr.T)
    w, V = np.linalg.eigh(Hr)
    hscale = 1.0 + np.max(np.abs(H), initial=0.0)
    if w[0] < -1e-9 * hscale:
        raise IndefiniteError(f"reduced Hessian has eigenvalue {w[0]:.3e}")
    flat = w <= 1e-10 * hscale
    gr = Z.T @ g
    if flat.any():
        g0 = V[:, flat].T @ gr
        if np.linalg.norm(g0) > 1e-10 * (1.0 + np.linalg.norm(g)):
            return -Z @ (V[:, flat] @ g0), True
    if not flat.any() and A_W.shape[0]:
        # KKT system through LU when it is nonsingular
        m = A_W.shape[0]
        K = np.block([[H, A_W.T], [A_W, np.zeros((m, m))]])
        try:
            sol = lu_solve(lu_factor(K, tau=1e-14), np.concatenate([-g, np.zeros(m)]))
            return sol[:n], False
        except SingularMatrixError:
            pass
    u = np.zeros_like(gr)
    keep = ~flat
    u_eig = -(V[:, keep].T @ gr) / w[keep]
    u = V[:, keep] @ u_eig
    return Z @ u, False


def qp_solve(qp, x0=None, check=True, max_iter=None):
    """Solve a :class:`QuadraticProgram` from a phase-1 feasible point."""
    n = qp.n
    m_eq, m_in = qp.A_eq.shape[0], qp.A_ineq.shape[0]
    if max_iter is None:
        max_iter = 50 * (n + m_eq + m_in) + 200
    x = _feasible_start(qp, x0)
    eq_rows = independent_rows(qp.A_eq) if m_eq else []
    A_e = qp.A_eq[eq_rows]

    def active_ok(i, W):
        return np.linalg.matrix_rank(np.vstack([A_e, qp.A_ineq[sorted(W | {i})]]), tol=1e-9) == len(eq_rows) + len(W) + 1

    W = set()
    if m_in:
        slack = qp.b_ineq - qp.A_ineq @ x
        for i in np.nonzero(np.abs(slack) <= 1e-10 * (1.0 + np.abs(qp.b_ineq)))[0]:
            if active_ok(int(i), W):
                W.add(int(i))

    for it in range(max_iter):
        g = qp.H @ x + qp.q
        Wl = sorted(W)
        A_W = np.vstack([A_e, qp.A_ineq[Wl]]) if Wl else A_e
        p, ray = _step(qp.H, g, A_W)
        if ray or np.linalg.norm(p) > 1e-12 * (1.0 + np.linalg.norm(x)):
            alpha, block = (np.inf if ray else 1.0), None
            for i in range(m_in):
                if i in W:
                    continue
                ap = qp.A_ineq[i] @ p
                if ap > _TOL:
                    a = max(qp.b_ineq[i] - qp.A_ineq[i] @ x, 0.0) / ap
                    if a < alpha:
                        alpha, block = a, i
            if block is None and ray:
                raise UnboundedError("QP objective is unbounded below along a zero-curvature ray")
            x = x + alpha * p
            if block is not None:
                W.add(block)
            continue
        # stationary on the working set: check multiplier signs
        if A_W.shape[0]:
            lam = np.linalg.lstsq(A_W.T, -g, rcond=None)[0]
        else:
            lam = np.zeros(0)
        mu_W = lam[len(eq_rows):]
        if mu_W.size == 0 or np.min(mu_W) >= -1e-10 * (1.0 + np.max(np.abs(mu_W))):
            eq_mult = np.zeros(m_eq)
            eq_mult[eq_rows] = lam[: len(eq_rows)]
            mu = np.zeros(m_in)
            mu[Wl] = np.maximum(mu_W, 0.0)
            res = QPResult(OPTIMAL, x, eq_mult, mu, Wl, it)
            res.kkt_residual = qp_kkt_residual(qp, x, eq_mult, mu)
            if check and res.kkt_residual > KKT_TOL * _scale(qp):
                raise KKTCheckError(f"QP solution failed the KKT check (residual {res.kkt_residual:.3e})")
            return res
        drop = Wl[int(np.argmin(mu_W))]
        W.discard(drop)
    raise CyclingError(f"active-set QP exceeded {max_iter} iterations")
