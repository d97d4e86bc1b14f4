"""SUMT log-barrier / quadratic-penalty solver and barrier-path sensitivities.

W(x, r, p) = f - r * sum(log(-h)) + (1 / 2r) * sum(g^2), with recovered
multipliers y = g / r and z = -r / h (so z > 0 under h <= 0).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IndefiniteError, InfeasibleError, LineSearchError, NonConvergenceError
from .expr import evaluate
from .kkt import PrimalDualPoint
from .linalg import lu_factor, lu_solve
from .problem import eval_derivatives, eval_values, lagrangian_from_bundle
from .sensitivity import SensitivityResult

DEFAULT_SCHEDULE = tuple(10.0 ** -k for k in range(1, 8))
ARMIJO_C = 1e-4
BOUNDARY_FRACTION = 0.995


@dataclass
class BarrierState:
    x: np.ndarray
    r: float
    y: np.ndarray
    z: np.ndarray
    iterations: int = 0
    grad_norm: float = 0.0
    log: list = field(default_factory=list)

    def as_dict(self):
        return {"r": self.r, "iterations": self.iterations, "grad_norm": self.grad_norm}


def _merit(nlp, x, p, r):
    """W at x, or inf outside the strict interior / function domain."""
    try:
        f, g, h = eval_values(nlp, x, p)
    except DomainError:
        return np.inf, None
    if h.size and np.max(h) >= 0.0:
        return np.inf, h
    return f - r * np.sum(np.log(-h)) + 0.5 * np.sum(g * g) / r, h


def _barrier_hessian(d, r, y, z):
    lag = lagrangian_from_bundle(d, y, z)
    H = lag.hess_xx + (d.h_x.T * (z * z / r)) @ d.h_x + d.g_x.T @ d.g_x / r
    Hxp = lag.hess_xp + (d.h_x.T * (z * z / r)) @ d.h_p + d.g_x.T @ d.g_p / r
    return lag.grad_x, 0.5 * (H + H.T), Hxp


def _multipliers(d, r):
    return d.g / r, -r / d.h


def _grad_norm(nlp, x, p, r):
    d = eval_derivatives(nlp, x, p)
    y, z = _multipliers(d, r)
    return float(np.max(np.abs(lagrangian_from_bundle(d, y, z).grad_x), initial=0.0))


def _newton_direction(H, grad):
    """Cholesky-based Newton step with a growing diagonal shift when needed."""
    n = H.shape[0]
    shift = 0.0
    base = 1e-10 * (1.0 + np.max(np.abs(H), initial=0.0))
    for _ in range(40):
        try:
            L = np.linalg.cholesky(H + shift * np.eye(n))
            return -np.linalg.solve(L.T, np.linalg.solve(L, grad)), shift
        except np.linalg.LinAlgError:
            shift = base if shift == 0.0 else 10.0 * shift
    raise IndefiniteError("could not regularize the barrier Hessian")


def _stage(nlp, x, p, r, tol, max_iter):
    state = BarrierState(x.copy(), r, None, None)
    W, h = _merit(nlp, x, p, r)
    for it in range(max_iter):
        d = eval_derivatives(nlp, x, p)
        y, z = _multipliers(d, r)
        grad, H, _ = _barrier_hessian(d, r, y, z)
        gnorm = float(np.max(np.abs(grad), initial=0.0))
        scale = 1.0 + np.max(np.abs(d.f_x), initial=0.0) + np.max(np.abs(y), initial=0.0) + np.max(np.abs(z), initial=0.0)
        state.log.append({"iter": it, "W": float(W), "grad": gnorm,
                          "max_h": float(np.max(d.h)) if d.h.size else None})
        if gnorm <= tol * scale:
            break
        dx, _ = _newton_direction(H, grad)
        slope = float(grad @ dx)
        if -slope <= 1e-26 * (1.0 + abs(W)):
            break  # Newton decrement at roundoff level
        alpha = 1.0
        for _ in range(60):
            xn = x + alpha * dx
            Wn, hn = _merit(nlp, xn, p, r)
            interior = hn is None or not h.size or np.all(hn <= (1.0 - BOUNDARY_FRACTION) * h)
            if np.isfinite(Wn) and interior:
                if Wn <= W + ARMIJO_C * alpha * slope:
                    break
                # merit flat at roundoff: accept when the gradient shrinks
                if abs(Wn - W) <= 1e-13 * (1.0 + abs(W)) and _grad_norm(nlp, xn, p, r) < gnorm:
                    break
            alpha *= 0.5
        else:
            if gnorm <= 1e3 * tol * scale:
                break
            raise LineSearchError(f"line search failed at r={r:.1e} (gradient {gnorm:.3e})", x)
        if h.size:
            assert np.max(hn) < 0.0
        x, W, h = xn, Wn, hn
    else:
        raise NonConvergenceError(f"barrier stage r={r:.1e} hit {max_iter} iterations", x)
    d = eval_derivatives(nlp, x, p)
    state.x = x
    state.y, state.z = _multipliers(d, r)
    state.iterations = it
    state.grad_norm = float(np.max(np.abs(_barrier_hessian(d, r, state.y, state.z)[0]), initial=0.0))
    return state


def find_interior(nlp, p, x0=None, max_iter=200):
    """A point with h(x, p) < 0, found by a barrier phase 1 on (x, s) if needed."""
    p = np.asarray(p, dtype=float)
    x = np.zeros(nlp.n) if x0 is None else np.array(x0, dtype=float)
    if nlp.m_i == 0:
        return x

    def hvals(xx):
        try:
            return np.array([evaluate(e, list(xx), list(p)) for e in nlp.inequalities], dtype=float)
        except DomainError:
            return None

    h = hvals(x)
    if h is not None and np.max(h) < 0.0:
        return x
    if h is None:
        raise InfeasibleError("starting point lies outside the domain of the constraint functions")
    # minimize s + delta/2 |x - x0|^2 - rho * sum log(s - h_i(x))
    s = float(np.max(h)) + 1.0
    xa = x.copy()
    delta = 1e-2
    rho = 1.0
    for _ in range(max_iter):
        d = eval_derivatives(nlp, x, p)
        psi = s - d.h
        G = np.hstack([-d.h_x, np.ones((nlp.m_i, 1))])
        grad = np.concatenate([delta * (x - xa), [1.0]]) - rho * (G.T @ (1.0 / psi))
        H = rho * (G.T * (1.0 / psi ** 2)) @ G
        H[: nlp.n, : nlp.n] += rho * np.tensordot(1.0 / psi, d.h_xx, axes=1) + delta * np.eye(nlp.n)
        step, _ = _newton_direction(0.5 * (H + H.T), grad)
        cap = 1.0 + np.max(np.abs(x), initial=0.0)
        if np.max(np.abs(step[:-1]), initial=0.0) <= 1e-8 * cap:
            # stalled at a saddle of the phase-1 barrier: follow negative curvature
            w, V = np.linalg.eigh(0.5 * (H + H.T))
            if w[0] < -1e-12:
                dneg = V[:, 0] if V[:, 0] @ grad <= 0 else -V[:, 0]
                step = step + 1e-2 * cap * dneg / max(np.max(np.abs(dneg[:-1])), 1e-300)
        alpha = min(1.0, cap / max(np.max(np.abs(step[:-1]), initial=0.0), 1e-300))
        for _ in range(60):
            xn, sn = x + alpha * step[:-1], s + alpha * step[-1]
            hn = hvals(xn)
            if hn is not None and np.all(sn - hn > 0.0):
                break
            alpha *= 0.5
        else:
            raise InfeasibleError("phase 1 could not find a strictly feasible point")
        x, s = xn, sn
        if np.max(hn) < 0.0:
            return x
        if abs(alpha * step[-1]) < 1e-3 * rho or np.linalg.norm(grad) < 1e-6:
            rho *= 0.2
        if rho < 1e-14:
            break
    raise InfeasibleError("no strictly feasible point found (phase 1 exhausted)")


def sumt_solve(nlp, p, x0=None, r_schedule=DEFAULT_SCHEDULE, tol=1e-9, max_iter=200):
    """Sequential unconstrained minimization along a decreasing r schedule.

    Returns the recovered primal-dual point at the last r and the per-stage trail.
    """
    p = np.asarray(p, dtype=float).reshape(nlp.ell)
    r_schedule = [float(r) for r in r_schedule]
    if not r_schedule or any(r <= 0 for r in r_schedule) or any(b >= a for a, b in zip(r_schedule, r_schedule[1:])):
        raise ValueError("r_schedule must be a strictly decreasing list of positive values")
    x = np.zeros(nlp.n) if x0 is None else np.array(x0, dtype=float).reshape(nlp.n)
    if nlp.m_i:
        try:
            h = eval_values(nlp, x, p)[2]
        except DomainError as exc:
            raise InfeasibleError(f"start point outside the function domain: {exc}") from exc
        if np.max(h) >= 0.0:
            raise InfeasibleError(f"start point is not strictly feasible (max h = {np.max(h):.3e})")
    trail = []
    for r in r_schedule:
        state = _stage(nlp, x, p, r, tol, max_iter)
        trail.append(state)
        x = state.x
    last = trail[-1]
    return PrimalDualPoint(last.x, last.y, last.z, p), trail


def barrier_sensitivity(nlp, state, p):
    """J_p of (x, y, z) along the barrier path at fixed r."""
    p = np.asarray(p, dtype=float).reshape(nlp.ell)
    d = eval_derivatives(nlp, state.x, p)
    r = state.r
    y, z = _multipliers(d, r)
    _, H, Hxp = _barrier_hessian(d, r, y, z)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteError("barrier Hessian is not positive definite; not at a barrier minimizer") from exc
    Jx = -np.linalg.solve(L.T, np.linalg.solve(L, Hxp))
    Jy = (d.g_x @ Jx + d.g_p) / r
    Jz = (r / d.h ** 2)[:, None] * (d.h_x @ Jx + d.h_p)
    return SensitivityResult(Jx, Jy.reshape(nlp.m_e, nlp.ell), Jz.reshape(nlp.m_i, nlp.ell), "barrier",
                             info={"r": r})


# -- barrier KKT form on the slack reformulation ------------------------------------

@dataclass
class BarrierKKTPoint:
    """Solution of F_mu(x, s, y_g, y_h, z) = 0 for the slack form h + s = 0, s >= 0."""

    x: np.ndarray
    s: np.ndarray
    y_g: np.ndarray
    y_h: np.ndarray
    z: np.ndarray
    p: np.ndarray
    mu: float
    residual: float


def _barrier_F(nlp, w, p, mu):
    x, s, yg, yh, z = w
    d = eval_derivatives(nlp, x, p)
    lag = lagrangian_from_bundle(d, yg, yh)
    F = np.concatenate([lag.grad_x, yh - z, d.g, d.h + s, s * z - mu])
    return F, d, lag


def _barrier_J(nlp, w, d, lag):
    x, s, yg, yh, z = w
    n, me, mi = nlp.n, nlp.m_e, nlp.m_i
    I, O = np.eye(mi), np.zeros
    Jg, Jh = d.g_x.reshape(me, n), d.h_x.reshape(mi, n)
    return np.block([
        [lag.hess_xx, O((n, mi)), Jg.T, Jh.T, O((n, mi))],
        [O((mi, n)), O((mi, mi)), O((mi, me)), I, -I],
        [Jg, O((me, mi)), O((me, me)), O((me, mi)), O((me, mi))],
        [Jh, I, O((mi, me)), O((mi, mi)), O((mi, mi))],
        [O((mi, n)), np.diag(z), O((mi, me)), O((mi, mi)), np.diag(s)],
    ])


def barrier_kkt_point(nlp, point, mu, tol=1e-10, max_iter=100):
    """Newton solve of F_mu = 0 started from a primal-dual point."""
    p = point.p
    x = point.x.copy()
    h = eval_values(nlp, x, p)[2]
    s = np.maximum(-h, np.sqrt(mu))
    z = mu / s
    w = [x, s, point.y.copy(), z.copy(), z]
    for _ in range(max_iter):
        F, d, lag = _barrier_F(nlp, w, p, mu)
        res = float(np.max(np.abs(F), initial=0.0))
        if res <= tol:
            break
        step = lu_solve(lu_factor(_barrier_J(nlp, w, d, lag), tau=1e-14), -F)
        parts = np.split(step, np.cumsum([nlp.n, nlp.m_i, nlp.m_e, nlp.m_i]))
        alpha = 1.0
        for cur, dv in ((w[1], parts[1]), (w[4], parts[4])):
            neg = dv < 0
            if neg.any():
                alpha = min(alpha, BOUNDARY_FRACTION * float(np.min(-cur[neg] / dv[neg])))
        w = [a + alpha * b for a, b in zip(w, parts)]
    else:
        raise NonConvergenceError(f"barrier KKT Newton did not converge (residual {res:.3e})", w[0])
    return BarrierKKTPoint(w[0], w[1], w[2], w[3], w[4], p, mu, res)


def barrier_kkt_sensitivity(nlp, point, mu):
    """J_p w(mu, p) = -(J_w F_mu)^{-1} J_p F_mu on the slack reformulation."""
    bp = point if isinstance(point, BarrierKKTPoint) else barrier_kkt_point(nlp, point, mu)
    w = [bp.x, bp.s, bp.y_g, bp.y_h, bp.z]
    F, d, lag = _barrier_F(nlp, w, bp.p, mu)
    n, me, mi, ell = nlp.n, nlp.m_e, nlp.m_i, nlp.ell
    JpF = np.vstack([lag.hess_xp, np.zeros((mi, ell)), d.g_p.reshape(me, ell),
                     d.h_p.reshape(mi, ell), np.zeros((mi, ell))])
    F_w = lu_factor(_barrier_J(nlp, w, d, lag))
    Jw = -lu_solve(F_w, JpF)
    Jx = Jw[:n]
    Jy = Jw[n + mi:n + mi + me]
    Jz = Jw[n + 2 * mi + me:]
    return SensitivityResult(Jx, Jy, Jz, "barrier", info={"mu": mu, "form": "barrier_kkt",
                                                            "residual": bp.residual})
