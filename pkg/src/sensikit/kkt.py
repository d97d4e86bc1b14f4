"""Active sets, multiplier polytopes, critical cones and CQ diagnostics.

Sign convention: L = f + y'g + z'h with g = 0, h <= 0 and z >= 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionError, EmptyPolytopeError, GuardExceededError,
                     NonConvergenceError, NotStationaryError)
from .linalg import TAU_RANK, null_space, qr_rank, rank
from .lp import OPTIMAL, LinearProgram, lp_solve
from .problem import eval_derivatives, lagrangian_from_bundle
from .vertices import GUARD, PolytopeVertices, enumerate_vertices

EPS_ACT = 1e-6
STATIONARY_TOL = 1e-6
PD_SHIFT = 1e-8


@dataclass(frozen=True)
class PrimalDualPoint:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "z", "p"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))

    def check(self, nlp):
        if (self.x.size, self.y.size, self.z.size, self.p.size) != (nlp.n, nlp.m_e, nlp.m_i, nlp.ell):
            raise DimensionError(
                f"point has sizes {(self.x.size, self.y.size, self.z.size, self.p.size)}, "
                f"problem needs {(nlp.n, nlp.m_e, nlp.m_i, nlp.ell)}")
        return self

    def clamped(self, eps=EPS_ACT):
        """Copy with z clipped at zero once it is within eps of the orthant."""
        z = np.where(self.z >= -eps, np.maximum(self.z, 0.0), self.z)
        return PrimalDualPoint(self.x, self.y, z, self.p)

    def with_multipliers(self, y, z):
        return PrimalDualPoint(self.x, y, z, self.p)


@dataclass(frozen=True)
class KKTResidual:
    stationarity: float
    primal_eq: float
    primal_ineq: float
    complementarity: float
    dual_sign: float

    def __iter__(self):
        return iter((self.stationarity, self.primal_eq, self.primal_ineq, self.complementarity, self.dual_sign))

    def max(self):
        return max(self)

    def as_dict(self):
        return {"stationarity": self.stationarity, "primal_eq": self.primal_eq,
                "primal_ineq": self.primal_ineq, "complementarity": self.complementarity,
                "dual_sign": self.dual_sign}


@dataclass(frozen=True)
class ActiveSetInfo:
    active: tuple
    strongly_active: tuple
    weakly_active: tuple
    eps: float

    @property
    def scs(self):
        return len(self.weakly_active) == 0


@dataclass
class MultiplierPolytope:
    """{(y, z_A) : J_g' y + J_hA' z_A = -grad f, z_A >= 0}; inactive z pinned to 0."""

    A: np.ndarray
    b: np.ndarray
    sign_indices: tuple
    active: tuple
    m_e: int
    m_i: int
    vertices: PolytopeVertices

    def full(self, v):
        """Split a polytope point into (y, z) with zeros for inactive z."""
        y = v[: self.m_e].copy()
        z = np.zeros(self.m_i)
        z[list(self.active)] = v[self.m_e:]
        return y, z

    def vertex_multipliers(self):
        return [self.full(v) for v in self.vertices]

    @property
    def bounded(self):
        return self.vertices.bounded

    def reduced(self):
        """Row-reduced equalities (A_red, b_red) that stay consistent for inexact x."""
        return _project_range(self.A, self.b)[:2]

    def sign_bounds(self):
        lb = np.full(self.A.shape[1], -np.inf)
        lb[list(self.sign_indices)] = 0.0
        return lb


@dataclass
class CriticalCone:
    eq_rows: np.ndarray
    ineq_rows: np.ndarray
    joint: bool = False


@dataclass
class CQReport:
    licq: bool
    mfcq: bool
    smfcq: bool
    scs: bool
    sosc_subspace: bool
    ssosc_subspace: bool
    gssosc_subspace: bool
    crcq_sampled: bool
    crcq_samples: int
    n_vertices: int
    polytope_bounded: bool
    scs_per_vertex: list = field(default_factory=list)
    certificates: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "LICQ": self.licq, "MFCQ": self.mfcq, "SMFCQ": self.smfcq, "SCS": self.scs,
            "SOSC_subspace": self.sosc_subspace, "SSOSC_subspace": self.ssosc_subspace,
            "GSSOSC_subspace": self.gssosc_subspace,
            "CRCQ_sampled": {"verdict": self.crcq_sampled, "samples": self.crcq_samples, "heuristic": True},
            "n_vertices": self.n_vertices, "polytope_bounded": self.polytope_bounded,
            "SCS_per_vertex": list(self.scs_per_vertex),
            "certificates": _jsonable(self.certificates), "tolerances": dict(self.tolerances),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# -- residuals and active sets ----------------------------------------------

def kkt_residual(nlp, point, bundle=None):
    """Infinity-norm KKT residual components at a primal-dual point."""
    point.check(nlp)
    d = bundle if bundle is not None else eval_derivatives(nlp, point.x, point.p)
    lag = lagrangian_from_bundle(d, point.y, point.z)
    inf = lambda v: float(np.max(np.abs(v), initial=0.0))
    return KKTResidual(
        stationarity=inf(lag.grad_x),
        primal_eq=inf(d.g),
        primal_ineq=float(max(np.max(d.h, initial=0.0), 0.0)),
        complementarity=inf(point.z * d.h),
        dual_sign=float(max(-np.min(point.z, initial=0.0), 0.0)),
    )


def active_tolerance(x, eps=EPS_ACT):
    return eps * (1.0 + float(np.max(np.abs(x), initial=0.0)))


def strong_tolerance(z, eps=EPS_ACT):
    return eps * (1.0 + float(np.max(np.abs(z), initial=0.0)))


def active_indices(h, x, eps=EPS_ACT):
    return tuple(int(i) for i in np.nonzero(np.abs(h) <= active_tolerance(x, eps))[0])


def split_active(active, z, eps=EPS_ACT):
    tz = strong_tolerance(z, eps)
    strong = tuple(i for i in active if z[i] > tz)
    weak = tuple(i for i in active if z[i] <= tz)
    return strong, weak


def classify_active(nlp, point, eps=EPS_ACT, bundle=None, check=True):
    """Active, strongly active and weakly active inequality indices (zero-based)."""
    point.check(nlp)
    d = bundle if bundle is not None else eval_derivatives(nlp, point.x, point.p)
    if check:
        res = kkt_residual(nlp, point, d)
        if res.max() > STATIONARY_TOL:
            raise NotStationaryError(
                "point is not stationary: " + ", ".join(f"{k}={v:.3e}" for k, v in res.as_dict().items()),
                residual=res)
    active = active_indices(d.h, point.x, eps)
    strong, weak = split_active(active, point.z, eps)
    return ActiveSetInfo(active, strong, weak, eps)


# -- multiplier polytope ------------------------------------------------------

def _sampled_vertices(A, b, sign_idx, d, samples, seed=0):
    rng = np.random.default_rng(seed)
    lb = np.full(d, -np.inf)
    lb[list(sign_idx)] = 0.0
    found = []
    for _ in range(samples):
        res = lp_solve(LinearProgram(rng.normal(size=d), A, b, lb=lb))
        if res.status == OPTIMAL and all(np.max(np.abs(res.x - w)) > 1e-7 for w in found):
            found.append(res.x)
    found.sort(key=lambda v: tuple(np.round(v, 9)))
    return PolytopeVertices(found, samples, len(found), bounded=True, exhaustive=False)


def _project_range(A, rhs):
    """Project A v = rhs onto range(A); returns (A_red, b_red, least-squares residual)."""
    k = A.shape[1]
    if k == 0:
        return np.zeros((0, 0)), np.zeros(0), float(np.max(np.abs(rhs), initial=0.0))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > TAU_RANK * max(s[0], 1e-300))) if s.size else 0
    v_ls = np.linalg.lstsq(A, rhs, rcond=None)[0]
    resid = float(np.max(np.abs(A @ v_ls - rhs), initial=0.0))
    return s[:r, None] * Vt[:r], U[:, :r].T @ rhs, resid


def build_multiplier_polytope(nlp, x, p, active, bundle=None, guard=GUARD):
    """Multiplier set at x restricted to the given active inequalities."""
    d = bundle if bundle is not None else eval_derivatives(nlp, x, p)
    active = tuple(int(i) for i in active)
    A = np.hstack([d.g_x.T, d.h_x[list(active)].T]) if (nlp.m_e or active) else np.zeros((nlp.n, 0))
    rhs = -d.f_x
    k = A.shape[1]
    sign_idx = tuple(range(nlp.m_e, k))
    A_red, b_red, resid = _project_range(A, rhs)
    if resid > STATIONARY_TOL:
        raise EmptyPolytopeError(f"stationarity cannot be satisfied (residual {resid:.3e}); not a KKT point")
    if k == 0:
        verts = PolytopeVertices([np.zeros(0)], 1, 1)
    else:
        try:
            verts = enumerate_vertices(A_red.reshape(-1, k), b_red, sign_idx, guard=guard)
        except GuardExceededError:
            verts = _sampled_vertices(A_red, b_red, sign_idx, k, samples=4 * len(sign_idx))
    if not verts.vertices:
        raise EmptyPolytopeError("multiplier polytope is empty; not a KKT point under tolerance")
    return MultiplierPolytope(A, rhs, sign_idx, active, nlp.m_e, nlp.m_i, verts)


# -- critical cones -------------------------------------------------------------

def critical_cone(nlp, point, info, joint=False, bundle=None):
    """Equality rows (g and strongly active h) and inequality rows (weakly active h)."""
    d = bundle if bundle is not None else eval_derivatives(nlp, point.x, point.p)
    gx, hx = d.g_x, d.h_x
    if joint:
        gx = np.hstack([d.g_x, d.g_p])
        hx = np.hstack([d.h_x, d.h_p])
    width = gx.shape[1] if gx.size else (hx.shape[1] if hx.size else nlp.n + (nlp.ell if joint else 0))
    eq = np.vstack([gx.reshape(-1, width), hx[list(info.strongly_active)].reshape(-1, width)])
    ineq = hx[list(info.weakly_active)].reshape(-1, width)
    return CriticalCone(eq, ineq, joint)


# -- constraint qualifications --------------------------------------------------

def _mfcq_lp(E, I, n):
    """max t s.t. E d = 0, I d + t <= 0, t <= 1, |d| <= 1. Returns (t, d)."""
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.hstack([E, np.zeros((E.shape[0], 1))]) if E.shape[0] else None
    A_in = np.hstack([I, np.ones((I.shape[0], 1))]) if I.shape[0] else None
    lb = np.concatenate([-np.ones(n), [-np.inf]])
    ub = np.ones(n + 1)
    res = lp_solve(LinearProgram(c, A_eq, None if A_eq is None else np.zeros(E.shape[0]),
                                 A_in, None if A_in is None else np.zeros(I.shape[0]), lb, ub))
    if res.status != OPTIMAL:
        return -np.inf, np.zeros(n)
    return float(res.x[-1]), res.x[:n]


def _full_row_rank(M):
    return M.shape[0] == 0 or rank(M) == M.shape[0]


def positive_definite_on(H, Z, shift=PD_SHIFT):
    """Cholesky test of Z'HZ - shift*I; vacuous for an empty basis."""
    if Z.shape[1] == 0:
        return True, np.inf
    R = Z.T @ H @ Z
    R = 0.5 * (R + R.T)
    lam_min = float(np.linalg.eigvalsh(R)[0])
    try:
        np.linalg.cholesky(R - shift * np.eye(R.shape[0]))
        return True, lam_min
    except np.linalg.LinAlgError:
        return False, lam_min


def _ssosc_at(d, nlp, x, y, z, active, eps):
    strong, _ = split_active(active, z, eps)
    E = np.vstack([d.g_x.reshape(-1, nlp.n), d.h_x[list(strong)].reshape(-1, nlp.n)])
    Z = null_space(E, nlp.n)
    H = lagrangian_from_bundle(d, y, z).hess_xx
    return positive_definite_on(H, Z)


def crcq_sampled(nlp, point, radius=1e-4, samples=20, eps=EPS_ACT, seed=0):
    """Heuristic: rank of the full active-gradient family constant on sampled x."""
    d = eval_derivatives(nlp, point.x, point.p)
    active = active_indices(d.h, point.x, eps)
    if nlp.m_e + len(active) == 0:
        return True
    from .problem import eval_first_order

    def family_rank(x):
        _, J = eval_first_order(nlp, x, point.p)
        rows = [1 + i for i in range(nlp.m_e)] + [1 + nlp.m_e + i for i in active]
        return rank(J[rows, : nlp.n])

    r0 = family_rank(point.x)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        u = rng.normal(size=nlp.n)
        u *= radius * rng.uniform() ** (1.0 / nlp.n) / max(np.linalg.norm(u), 1e-300)
        if family_rank(point.x + u) != r0:
            return False
    return True


def check_cq(nlp, point, eps=EPS_ACT, crcq_samples=20):
    """Executable CQ diagnostics at a KKT point."""
    point.check(nlp)
    d = eval_derivatives(nlp, point.x, point.p)
    info = classify_active(nlp, point, eps, bundle=d)
    n = nlp.n
    Jg = d.g_x.reshape(-1, n)
    JA = d.h_x[list(info.active)].reshape(-1, n)
    JS = d.h_x[list(info.strongly_active)].reshape(-1, n)
    JW = d.h_x[list(info.weakly_active)].reshape(-1, n)
    certs = {}

    family = np.vstack([Jg, JA])
    r_family = qr_rank(family)[1] if family.shape[0] else 0
    licq = r_family == family.shape[0]
    certs["LICQ"] = {"rank": r_family, "rows": family.shape[0]}

    t, dvec = _mfcq_lp(Jg, JA, n)
    mfcq = _full_row_rank(Jg) and t > eps
    certs["MFCQ"] = {"t": t, "d": dvec}

    E_s = np.vstack([Jg, JS])
    t_s, d_s = _mfcq_lp(E_s, JW, n)
    smfcq = _full_row_rank(E_s) and t_s > eps
    certs["SMFCQ"] = {"t": t_s, "d": d_s}

    poly = build_multiplier_polytope(nlp, point.x, point.p, info.active, bundle=d)
    verts = poly.vertex_multipliers()
    certs["vertices"] = [np.concatenate([y, z]) for y, z in verts]
    certs["polytope_exhaustive"] = poly.vertices.exhaustive
    if smfcq and len(verts) != 1:
        certs["SMFCQ_uniqueness_violation"] = len(verts)

    ok_here, lam_here = _ssosc_at(d, nlp, point.x, point.y, point.z, info.active, eps)
    per_vertex = [_ssosc_at(d, nlp, point.x, y, z, info.active, eps) for y, z in verts]
    certs["SSOSC_min_eigenvalue"] = lam_here
    certs["vertex_min_eigenvalues"] = [lam for _, lam in per_vertex]
    scs_per_vertex = [len(split_active(info.active, z, eps)[1]) == 0 for _, z in verts]

    crcq = crcq_sampled(nlp, point, samples=crcq_samples, eps=eps)
    return CQReport(
        licq=bool(licq), mfcq=bool(mfcq), smfcq=bool(smfcq), scs=info.scs,
        sosc_subspace=bool(ok_here or any(ok for ok, _ in per_vertex)),
        ssosc_subspace=bool(ok_here),
        gssosc_subspace=bool(all(ok for ok, _ in per_vertex)) and poly.bounded,
        crcq_sampled=bool(crcq), crcq_samples=crcq_samples,
        n_vertices=len(verts), polytope_bounded=bool(poly.bounded),
        scs_per_vertex=scs_per_vertex, certificates=certs,
        tolerances={"eps_act": eps, "rank": TAU_RANK, "pd_shift": PD_SHIFT, "stationary": STATIONARY_TOL},
    )


# -- Newton polish on a fixed active set ------------------------------------------

def solve_active_kkt(nlp, x, y, z, p, active, tol=1e-11, max_iter=50, stats=None):
    """Newton on grad L = 0, g = 0, h_A = 0 with the inequalities in ``active`` as equalities.

    Returns (x, y, z) with z zero off the active set. Rank-deficient Jacobians
    fall back to a minimum-norm least-squares step.
    """
    active = list(active)
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float).reshape(nlp.m_e)
    zA = np.array(z, dtype=float).reshape(nlp.m_i)[active]
    n, me, ma = nlp.n, nlp.m_e, len(active)
    res_norm = np.inf
    for _ in range(max_iter):
        d = eval_derivatives(nlp, x, p)
        zfull = np.zeros(nlp.m_i)
        zfull[active] = zA
        lag = lagrangian_from_bundle(d, y, zfull)
        JA = d.h_x[active].reshape(ma, n)
        F = np.concatenate([lag.grad_x, d.g, d.h[active]])
        res_norm = float(np.max(np.abs(F), initial=0.0))
        if res_norm <= tol:
            return x, y, zfull
        C = np.vstack([d.g_x.reshape(me, n), JA])
        K = np.block([[lag.hess_xx, C.T], [C, np.zeros((me + ma, me + ma))]])
        step = np.linalg.lstsq(K, -F, rcond=None)[0]
        if stats is not None:
            stats["newton"] = stats.get("newton", 0) + 1
        x = x + step[:n]
        y = y + step[n:n + me]
        zA = zA + step[n + me:]
    if res_norm <= 100 * tol:
        zfull = np.zeros(nlp.m_i)
        zfull[active] = zA
        return x, y, zfull
    raise NonConvergenceError(f"active-set Newton did not converge (residual {res_norm:.3e})", x)


def _independent_subset(nlp, x, p, order):
    """Greedy rank-increasing selection of inequality rows, g rows always kept."""
    d = eval_derivatives(nlp, x, p)
    rows = [r for r in d.g_x.reshape(nlp.m_e, nlp.n)]
    keep = []
    for i in order:
        trial = np.vstack(rows + [d.h_x[i]])
        if rank(trial) == trial.shape[0]:
            rows.append(d.h_x[i])
            keep.append(i)
    return sorted(keep)


def refine_active_set(nlp, x, y, z, p, active, tol=1e-11, sign_tol=1e-9, max_rounds=None, stats=None):
    """Polish on a working set, dropping negative multipliers and adding violated rows.

    An inconsistent working set (dependent rows with incompatible values) is
    reduced to an independent subset, preferring the most recently added row
    and then larger multipliers. Returns (x, y, z, working_set). Newton step
    and active-set change counts are accumulated in ``stats`` when given.
    """
    work = sorted(set(int(i) for i in active))
    z = np.asarray(z, dtype=float)
    recent = None
    max_rounds = max_rounds or 4 * nlp.m_i + 4
    for _ in range(max_rounds):
        try:
            xs, ys, zs = solve_active_kkt(nlp, x, y, z, p, work, tol=tol, stats=stats)
        except NonConvergenceError:
            order = ([recent] if recent in work else []) + sorted(
                (i for i in work if i != recent), key=lambda i: -z[i])
            reduced = _independent_subset(nlp, x, p, order)
            if reduced == work:
                raise
            work = reduced
            continue
        d_h = eval_derivatives(nlp, xs, p).h if nlp.m_i else np.zeros(0)
        scale = 1.0 + float(np.max(np.abs(zs), initial=0.0))
        neg = [i for i in work if zs[i] < -sign_tol * scale]
        viol = [i for i in range(nlp.m_i) if i not in work and d_h[i] > sign_tol * (1.0 + np.max(np.abs(xs)))]
        if not neg and not viol:
            zs = np.where(zs < 0.0, 0.0, zs)
            return xs, ys, zs, work
        if stats is not None:
            stats["changes"] = stats.get("changes", 0) + 1
        if neg:
            work.remove(min(neg, key=lambda i: zs[i]))
        else:
            recent = max(viol, key=lambda i: d_h[i])
            work = sorted(work + [recent])
        x, y, z = xs, ys, zs
    raise NonConvergenceError("active-set refinement did not settle", x)
