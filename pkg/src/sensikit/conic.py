"""Differentiation of conic programs through the homogeneous self-dual embedding.

Primal: min c'x s.t. A x = b, x in K.  Dual: A'y + s = c, s in K*.
With u = (x, y, tau) and v = (s, 0, kappa) the embedding reads Q u = v,
u in C = K x R^m x R+, v in C*, where Q is the skew matrix built from (A, b, c).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import fixture_path
from .errors import DimensionError, KinkError, SingularMatrixError, StructureError
from .kkt import EPS_ACT
from .linalg import lsqr_solve, lu_factor, lu_solve
from .lp import OPTIMAL, LinearProgram, lp_solve

CONE_KINDS = ("zero", "free", "nonneg", "soc")
KKT_TOL = 1e-7


@dataclass(frozen=True)
class ConeSpec:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple((str(k), int(d)) for k, d in self.blocks)
        for kind, dim in blocks:
            if kind not in CONE_KINDS:
                raise StructureError(f"unknown cone kind '{kind}' (expected one of {', '.join(CONE_KINDS)})")
            if dim < 1 or (kind == "soc" and dim < 2):
                raise StructureError(f"cone block {kind} has invalid dimension {dim}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self):
        return sum(d for _, d in self.blocks)

    def slices(self):
        start = 0
        for kind, dim in self.blocks:
            yield kind, slice(start, start + dim)
            start += dim

    def polyhedral(self):
        return all(kind != "soc" for kind, _ in self.blocks)


@dataclass(frozen=True)
class ConicProblem:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    cone: ConeSpec
    name: str = "conic"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if A.shape != (b.size, c.size):
            raise DimensionError(f"A is {A.shape} but b has {b.size} and c has {c.size} entries")
        if self.cone.dim != c.size:
            raise DimensionError(f"cone dimension {self.cone.dim} differs from n = {c.size}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def m(self):
        return self.b.size

    @property
    def n(self):
        return self.c.size

    def embedding_cone(self):
        """C = K x free(m) x nonneg(1)."""
        return ConeSpec(self.cone.blocks + ((("free", self.m),) if self.m else ()) + (("nonneg", 1),))


def skew_matrix(A, b, c):
    """Q = [[0, -A', c], [A, 0, -b], [-c', b', 0]]."""
    m, n = A.shape
    return np.block([
        [np.zeros((n, n)), -A.T, c.reshape(n, 1)],
        [A, np.zeros((m, m)), -b.reshape(m, 1)],
        [-c.reshape(1, n), b.reshape(1, m), np.zeros((1, 1))],
    ])


def _soc_project(z, eps):
    t, xb = z[0], z[1:]
    nrm = float(np.linalg.norm(xb))
    k = z.size
    kink = abs(nrm - abs(t)) <= eps
    if nrm <= t:
        return z.copy(), np.eye(k), not kink
    if nrm <= -t:
        return np.zeros(k), np.zeros((k, k)), not kink
    w = xb / nrm
    u = 0.5 * (t + nrm) * np.concatenate([[1.0], w])
    J = np.empty((k, k))
    J[0, 0] = 1.0
    J[0, 1:] = w
    J[1:, 0] = w
    J[1:, 1:] = (1.0 + t / nrm) * np.eye(k - 1) - (t / nrm) * np.outer(w, w)
    return u, 0.5 * J, not kink


def project_cone(spec, z, eps=EPS_ACT):
    """Blockwise projection onto the cone; returns (u, J, differentiable, kinks)."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != spec.dim:
        raise DimensionError(f"vector has {z.size} entries, cone has dimension {spec.dim}")
    u = np.zeros_like(z)
    J = np.zeros((z.size, z.size))
    kinks = []
    for b, (kind, sl) in enumerate(spec.slices()):
        zb = z[sl]
        if kind == "zero":
            continue
        if kind == "free":
            u[sl] = zb
            J[sl, sl] = np.eye(zb.size)
        elif kind == "nonneg":
            u[sl] = np.maximum(zb, 0.0)
            J[sl, sl] = np.diag((zb > 0).astype(float))
            if np.any(np.abs(zb) <= eps):
                kinks.append(b)
        else:
            ub, Jb, ok = _soc_project(zb, eps)
            u[sl] = ub
            J[sl, sl] = Jb
            if not ok:
                kinks.append(b)
    return u, J, not kinks, kinks


@dataclass
class HSDPoint:
    z: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def tau(self):
        return float(self.u[-1])

    @property
    def kappa(self):
        return float(self.v[-1])

    @classmethod
    def from_z(cls, prob, z):
        z = np.asarray(z, dtype=float).reshape(-1)
        u = project_cone(prob.embedding_cone(), z)[0]
        return cls(z, u, u - z)

    @classmethod
    def from_solution(cls, prob, x, y, s):
        """z = (x, y, 1) - (s, 0, 0)."""
        x, y, s = (np.asarray(a, dtype=float).reshape(-1) for a in (x, y, s))
        z = np.concatenate([x - s, y, [1.0]])
        return cls.from_z(prob, z)

    def invariants(self):
        uv = float(self.u @ self.v)
        return {"orthogonality": abs(uv) / (1.0 + np.linalg.norm(self.u) * np.linalg.norm(self.v)),
                "tau": self.tau, "kappa": self.kappa, "tau_kappa": self.tau * self.kappa}


@dataclass
class ResidualMap:
    R: np.ndarray
    J: np.ndarray
    differentiable: bool
    kinks: list = field(default_factory=list)


def residual_map(prob, z):
    """R(z) = ((Q - I) P_C + I) z and its Jacobian (Q - I) J_P + I."""
    z = np.asarray(z, dtype=float).reshape(-1)
    Q = skew_matrix(prob.A, prob.b, prob.c)
    u, JP, ok, kinks = project_cone(prob.embedding_cone(), z)
    I = np.eye(z.size)
    return ResidualMap((Q - I) @ u + z, (Q - I) @ JP + I, ok, kinks)


def conic_kkt_residual(prob, x, y, s):
    """max of primal, dual and gap residuals (cone membership is checked by the caller)."""
    return max(float(np.max(np.abs(prob.A @ x - prob.b), initial=0.0)),
               float(np.max(np.abs(prob.A.T @ y + s - prob.c), initial=0.0)),
               abs(float(prob.c @ x - prob.b @ y)))


@dataclass
class ConicSensitivity:
    dx: np.ndarray
    dy: np.ndarray
    ds: np.ndarray
    dz: np.ndarray
    least_squares: bool = False
    residual: float = 0.0

    def as_dict(self):
        return {"regime": "conic", "dx": self.dx.tolist(), "dy": self.dy.tolist(),
                "ds": self.ds.tolist(), "least_squares": self.least_squares,
                "residual_norm": self.residual}


def conic_sensitivity(prob, solution, dA=None, db=None, dc=None):
    """Differential of (x, y, s) for a data perturbation (dA, db, dc)."""
    x, y, s = (np.asarray(solution[k], dtype=float).reshape(-1) for k in ("x", "y", "s"))
    kkt = conic_kkt_residual(prob, x, y, s)
    if kkt > KKT_TOL * (1.0 + np.max(np.abs(prob.c), initial=0.0)):
        raise StructureError(f"supplied solution does not satisfy the conic KKT conditions (residual {kkt:.3e})")
    m, n = prob.m, prob.n
    dA = np.zeros((m, n)) if dA is None else np.asarray(dA, dtype=float).reshape(m, n)
    db = np.zeros(m) if db is None else np.asarray(db, dtype=float).reshape(m)
    dc = np.zeros(n) if dc is None else np.asarray(dc, dtype=float).reshape(n)
    pt = HSDPoint.from_solution(prob, x, y, s)
    rm = residual_map(prob, pt.z)
    if not rm.differentiable:
        raise KinkError(f"cone projection is not differentiable at the solution (blocks {rm.kinks}); "
                        "complementarity is degenerate")
    rhs = -skew_matrix(dA, db, dc) @ pt.u
    lsq = False
    try:
        dz = lu_solve(lu_factor(rm.J), rhs)
    except SingularMatrixError:
        dz, _, _ = lsqr_solve(rm.J, rhs)
        lsq = True
    JP = project_cone(prob.embedding_cone(), pt.z)[1]
    du = JP @ dz
    dv = du - dz
    w = pt.tau
    dw = du[-1]
    dx = (du[:n] - x * dw) / w
    dy = (du[n:n + m] - y * dw) / w
    ds = (dv[:n] - s * dw) / w
    return ConicSensitivity(dx, dy, ds, dz, lsq, float(np.linalg.norm(rm.J @ dz - rhs)))


def solve_polyhedral(prob):
    """Primal-dual solution of a conic LP (zero, free and nonneg blocks) by simplex."""
    if not prob.cone.polyhedral():
        raise StructureError("only zero, free and nonneg cones can be solved here; supply a solution")
    lb = np.full(prob.n, -np.inf)
    ub = np.full(prob.n, np.inf)
    for kind, sl in prob.cone.slices():
        if kind == "nonneg":
            lb[sl] = 0.0
        elif kind == "zero":
            lb[sl] = ub[sl] = 0.0
    res = lp_solve(LinearProgram(prob.c, prob.A, prob.b, lb=lb, ub=ub))
    if res.status != OPTIMAL:
        raise StructureError(f"conic LP is {res.status}")
    s = res.lower_duals - res.upper_duals
    return {"x": res.x, "y": -res.eq_duals, "s": s}


def load_conic(source):
    """(ConicProblem, solution or None) from a path, fixture name or dict."""
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        text = path.read_text() if path.exists() else fixture_path(str(source)).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StructureError(f"malformed conic JSON: {exc}") from exc
    missing = [k for k in ("A", "b", "c", "cones") if k not in data]
    if missing:
        raise StructureError("conic JSON lacks " + ", ".join(missing))
    cone = ConeSpec(tuple((blk["kind"], blk["dim"]) for blk in data["cones"]))
    prob = ConicProblem(data["A"], data["b"], data["c"], cone, data.get("name", "conic"))
    sol = data.get("solution")
    if sol is not None:
        sol = {k: np.asarray(sol[k], dtype=float) for k in ("x", "y", "s")}
    return prob, sol
