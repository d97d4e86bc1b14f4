"""Directional derivatives without strict complementarity or without LICQ.

All quadratic programs here share the objective 0.5 d'L_xx d + (L_xp h)'d and
differ only in which linearized constraints are equalities or inequalities.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InfeasibleError, ToleranceConflictError
from .kkt import (EPS_ACT, build_multiplier_polytope, check_cq, classify_active,
                  split_active, strong_tolerance)
from .lp import OPTIMAL, UNBOUNDED, LinearProgram, lp_solve
from .problem import eval_derivatives, lagrangian_from_bundle
from .qp import QuadraticProgram, qp_solve
from .sensitivity import _require

VERTEX_SPREAD_TOL = 1e-7
ARGMAX_TOL = 1e-9


@dataclass
class DirectionalDerivative:
    h: np.ndarray
    dx: np.ndarray
    dy: np.ndarray = None
    dz: np.ndarray = None
    selected_vertices: list = field(default_factory=list)
    log: list = field(default_factory=list)
    regime: str = "directional"

    @property
    def duals_available(self):
        return self.dy is not None

    def as_dict(self):
        out = {"regime": self.regime, "h": self.h.tolist(), "dx": self.dx.tolist(),
               "dy": None if self.dy is None else self.dy.tolist(),
               "dz": None if self.dz is None else self.dz.tolist(),
               "selected_vertices": [np.asarray(v).tolist() for v in self.selected_vertices],
               "log": self.log}
        return out


@dataclass
class LDDerivative:
    R: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    stage_sets: list = field(default_factory=list)

    def as_dict(self):
        return {"regime": "ld", "R": self.R.tolist(), "X": self.X.tolist(), "Y": self.Y.tolist(),
                "Z": self.Z.tolist(),
                "stage_sets": [{"weak": list(w), "strong": list(s)} for w, s in self.stage_sets]}


def _direction(nlp, h):
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.size != nlp.ell:
        raise DimensionError(f"direction has length {h.size}, problem has {nlp.ell} parameters")
    return h


def _linearized_qp(nlp, d, y, z, h, eq_ineq, in_ineq):
    """QP in d with g rows and eq_ineq rows as equalities and in_ineq rows as inequalities."""
    n = nlp.n
    lag = lagrangian_from_bundle(d, y, z)
    gx, gp = d.g_x.reshape(-1, n), d.g_p.reshape(-1, nlp.ell)
    hx, hp = d.h_x.reshape(-1, n), d.h_p.reshape(-1, nlp.ell)
    eq_ineq, in_ineq = list(eq_ineq), list(in_ineq)
    A_eq = np.vstack([gx, hx[eq_ineq]])
    b_eq = -np.concatenate([gp @ h, hp[eq_ineq] @ h])
    A_in = hx[in_ineq]
    b_in = -(hp[in_ineq] @ h)
    return QuadraticProgram(lag.hess_xx, lag.hess_xp @ h, A_eq, b_eq, A_in, b_in)


def _solve_stage(nlp, d, y, z, h, eq_ineq, in_ineq, label):
    qp = _linearized_qp(nlp, d, y, z, h, eq_ineq, in_ineq)
    try:
        res = qp_solve(qp)
    except InfeasibleError as exc:
        raise InfeasibleError(f"{label}: linearized constraints are inconsistent ({exc})") from exc
    return res


def directional_qp(nlp, point, h, cq=None):
    """Primal-dual directional derivative under LICQ and SSOSC (no SCS needed)."""
    h = _direction(nlp, h)
    d = eval_derivatives(nlp, point.x, point.p)
    info = classify_active(nlp, point, bundle=d)
    if cq is None:
        cq = check_cq(nlp, point)
    _require(cq, ("licq", "ssosc_subspace"))
    strong, weak = info.strongly_active, info.weakly_active
    res = _solve_stage(nlp, d, point.y, point.z, h, strong, weak, "directional QP")
    me = nlp.m_e
    dz = np.zeros(nlp.m_i)
    dz[list(strong)] = res.eq_multipliers[me:]
    dz[list(weak)] = res.ineq_multipliers
    binding = [weak[i] for i in res.working_set]
    log = [{"strong": list(strong), "weak": list(weak), "weak_binding": binding}]
    return DirectionalDerivative(h, res.x, res.eq_multipliers[:me].copy(), dz, log=log)


def dempe_lp(nlp, point, polytope, h, bundle=None):
    """Vertices of the multiplier set maximizing y'(J_p g)h + z'(J_p h)h.

    Returns a list of (y, z) pairs with z zero off the active set.
    """
    h = _direction(nlp, h)
    d = bundle if bundle is not None else eval_derivatives(nlp, point.x, point.p)
    active = list(polytope.active)
    c = np.concatenate([d.g_p.reshape(-1, nlp.ell) @ h, d.h_p.reshape(-1, nlp.ell)[active] @ h])
    k = c.size
    if k == 0:
        return [polytope.full(np.zeros(0))]
    A, b = polytope.reduced()
    res = lp_solve(LinearProgram(-c, A, b, lb=polytope.sign_bounds()))
    if res.status == UNBOUNDED:
        raise ToleranceConflictError("multiplier LP is unbounded although MFCQ was certified")
    if res.status != OPTIMAL:
        raise ToleranceConflictError("multiplier LP is infeasible at a certified KKT point")
    best = float(c @ res.x)
    tol = ARGMAX_TOL * (1.0 + abs(best))
    chosen = [v for v in polytope.vertices if c @ v >= best - tol]
    if not polytope.vertices.exhaustive and not any(np.max(np.abs(v - res.x)) <= 1e-7 for v in chosen):
        chosen.append(res.x)
    if not chosen:
        chosen = [res.x]
    return [polytope.full(v) for v in chosen]


def degenerate_directional(nlp, point, h, cq=None):
    """Primal directional derivative under MFCQ, CRCQ and GSSOSC.

    A Kyparisis QP is solved at every vertex selected by :func:`dempe_lp` and
    the results are required to agree.
    """
    h = _direction(nlp, h)
    d = eval_derivatives(nlp, point.x, point.p)
    info = classify_active(nlp, point, bundle=d)
    if cq is None:
        cq = check_cq(nlp, point)
    _require(cq, ("mfcq", "crcq_sampled", "gssosc_subspace"))
    poly = build_multiplier_polytope(nlp, point.x, point.p, info.active, bundle=d)
    selected = dempe_lp(nlp, point, poly, h, bundle=d)
    sols, log = [], []
    for y, z in selected:
        strong, weak = split_active(info.active, z)
        try:
            res = _solve_stage(nlp, d, y, z, h, strong, weak, "critical-set QP")
        except InfeasibleError as exc:
            raise ToleranceConflictError(
                f"critical set is empty for a selected multiplier vertex ({exc})") from exc
        sols.append(res.x)
        log.append({"vertex": np.concatenate([y, z]).tolist(), "strong": list(strong),
                    "weak": list(weak), "dx": res.x.tolist()})
    spread = max(float(np.max(np.abs(s - sols[0]), initial=0.0)) for s in sols)
    if spread > VERTEX_SPREAD_TOL:
        raise ToleranceConflictError(
            f"directional derivative depends on the multiplier vertex (spread {spread:.3e})")
    vertices = [np.concatenate([y, z]) for y, z in selected]
    return DirectionalDerivative(h, sols[0], None, None, vertices, log, regime="degenerate")


def ld_derivative(nlp, point, R, cq=None):
    """LD-derivative along the columns of R through a hierarchy of QPs."""
    R = np.asarray(R, dtype=float)
    if R.ndim == 1:
        R = R.reshape(nlp.ell, -1)
    if R.shape[0] != nlp.ell:
        raise DimensionError(f"direction matrix has {R.shape[0]} rows, problem has {nlp.ell} parameters")
    d = eval_derivatives(nlp, point.x, point.p)
    info = classify_active(nlp, point, bundle=d)
    if cq is None:
        cq = check_cq(nlp, point)
    _require(cq, ("licq", "ssosc_subspace"))
    k = R.shape[1]
    X, Y, Z = np.zeros((nlp.n, k)), np.zeros((nlp.m_e, k)), np.zeros((nlp.m_i, k))
    strong, weak = list(info.strongly_active), list(info.weakly_active)
    hx, hp = d.h_x.reshape(-1, nlp.n), d.h_p.reshape(-1, nlp.ell)
    stages = []
    for j in range(k):
        r = R[:, j]
        res = _solve_stage(nlp, d, point.y, point.z, r, strong, weak, f"stage {j + 1}")
        dx = res.x
        X[:, j] = dx
        Y[:, j] = res.eq_multipliers[: nlp.m_e]
        Z[strong, j] = res.eq_multipliers[nlp.m_e:]
        Z[weak, j] = res.ineq_multipliers
        gamma = res.ineq_multipliers
        lin = hx[weak] @ dx + hp[weak] @ r if weak else np.zeros(0)
        lin_tol = EPS_ACT * (1.0 + np.max(np.abs(dx), initial=0.0) + np.max(np.abs(r), initial=0.0))
        g_tol = strong_tolerance(gamma) if gamma.size else 0.0
        tight = [abs(lin[t]) <= lin_tol for t in range(len(weak))]
        promoted = [i for t, i in enumerate(weak) if tight[t] and gamma[t] > g_tol]
        weak = [i for t, i in enumerate(weak) if tight[t] and gamma[t] <= g_tol]
        strong = sorted(strong + promoted)
        stages.append((tuple(weak), tuple(strong)))
    return LDDerivative(R, X, Y, Z, stages)


def _lex_le(x, y):
    diff = np.nonzero(x != y)[0]
    return diff.size == 0 or x[diff[0]] < y[diff[0]]


def lmin(x, y):
    """Lexicographic minimum of two vectors."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise DimensionError(f"lmin needs equal shapes, got {x.shape} and {y.shape}")
    return x.copy() if _lex_le(x, y) else y.copy()


def lmmin(X, Y):
    """Row-wise lexicographic minimum of two matrices."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape:
        raise DimensionError(f"lmmin needs equal shapes, got {X.shape} and {Y.shape}")
    return np.array([lmin(a, b) for a, b in zip(X, Y)]).reshape(X.shape)
