"""Regular-case sensitivities: the Fiacco KKT system and the LP basis path."""

from dataclasses import dataclass, field

import numpy as np

from .errors import (BasisError, NotAnLPError, NotStationaryError, RegularityError,
                     SingularMatrixError, ToleranceConflictError)
from .expr import x_degree
from .kkt import STATIONARY_TOL, check_cq, classify_active, kkt_residual
from .linalg import lu_factor, lu_solve
from .problem import eval_derivatives, lagrangian_from_bundle

REGIMES = ("fiacco", "directional", "degenerate", "barrier", "conic", "lp_basis")


@dataclass
class SensitivityResult:
    """Jacobians of (x, y, z) with respect to p; inactive rows of J_z are zero."""

    J_x: np.ndarray
    J_y: np.ndarray
    J_z: np.ndarray
    regime: str
    cq: object = None
    least_squares: bool = False
    info: dict = field(default_factory=dict)

    def as_dict(self):
        out = {"regime": self.regime, "J_x": self.J_x.tolist(), "J_y": self.J_y.tolist(),
               "J_z": self.J_z.tolist(), "least_squares": self.least_squares}
        if self.info:
            out["info"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.info.items()}
        return out


@dataclass
class FiaccoSystem:
    """M [J_x; J_y; J_zI] = -N with M symmetric of size n + m_e + |I|."""

    M: np.ndarray
    N: np.ndarray
    active: tuple
    n: int
    m_e: int
    m_i: int
    factors: object = None

    @property
    def size(self):
        return self.M.shape[0]

    def solve(self):
        return -lu_solve(self.factors, self.N)

    def split(self, W):
        n, me = self.n, self.m_e
        Jz = np.zeros((self.m_i,) + W.shape[1:])
        Jz[list(self.active)] = W[n + me:]
        return W[:n], W[n:n + me], Jz


def build_fiacco_system(nlp, point, active, bundle=None, factor=True):
    d = bundle if bundle is not None else eval_derivatives(nlp, point.x, point.p)
    lag = lagrangian_from_bundle(d, point.y, point.z)
    active = tuple(active)
    n, me, ma = nlp.n, nlp.m_e, len(active)
    C = np.vstack([d.g_x.reshape(me, n), d.h_x[list(active)].reshape(ma, n)])
    M = np.block([[lag.hess_xx, C.T], [C, np.zeros((me + ma, me + ma))]])
    N = np.vstack([lag.hess_xp, d.g_p.reshape(me, nlp.ell), d.h_p[list(active)].reshape(ma, nlp.ell)])
    sys = FiaccoSystem(M, N, active, n, me, nlp.m_i)
    if factor:
        sys.factors = lu_factor(M)
    return sys


def _require(cq, names):
    failed = [name for name in names if not getattr(cq, name)]
    if failed:
        label = {"licq": "LICQ", "scs": "SCS", "sosc_subspace": "SOSC-subspace", "mfcq": "MFCQ",
                 "ssosc_subspace": "SSOSC-subspace", "gssosc_subspace": "GSSOSC-subspace",
                 "crcq_sampled": "CRCQ-sampled"}
        raise RegularityError("regularity not certified: " + ", ".join(label[f] for f in failed),
                              failed=tuple(label[f] for f in failed))


def fiacco_jacobian(nlp, point, cq=None):
    """Full primal-dual Jacobian under LICQ, SCS and SOSC.

    One LU factorization of M and one multi-column backsolve.
    """
    d = eval_derivatives(nlp, point.x, point.p)
    res = kkt_residual(nlp, point, d)
    if res.max() > STATIONARY_TOL:
        raise NotStationaryError(f"KKT residual {res.max():.3e} too large", residual=res)
    if cq is None:
        cq = check_cq(nlp, point)
    _require(cq, ("licq", "scs", "sosc_subspace"))
    info = classify_active(nlp, point, bundle=d, check=False)
    try:
        sys = build_fiacco_system(nlp, point, info.active, d)
    except SingularMatrixError as exc:
        raise ToleranceConflictError(f"KKT matrix singular although regularity was certified ({exc})") from exc
    Jx, Jy, Jz = sys.split(sys.solve())
    return SensitivityResult(Jx, Jy, Jz, "fiacco", cq, info={"active": list(info.active)})


def fiacco_system(nlp, point, cq=None):
    """Factored system for forward/adjoint products, with the same gating as fiacco_jacobian."""
    if cq is None:
        cq = check_cq(nlp, point)
    _require(cq, ("licq", "scs", "sosc_subspace"))
    info = classify_active(nlp, point, check=False)
    return build_fiacco_system(nlp, point, info.active)


def forward_sensitivity(system, u):
    """-M^{-1} N u: directional derivative of (x, y, z_I) along u."""
    u = np.asarray(u, dtype=float).reshape(-1)
    return -lu_solve(system.factors, system.N @ u)


def adjoint_sensitivity(system, v):
    """-N' M^{-T} v: gradient of <v, w(p)> with respect to p."""
    v = np.asarray(v, dtype=float).reshape(system.size)
    return -system.N.T @ lu_solve(system.factors, v, trans=True)


def is_affine_in_x(nlp):
    return all(x_degree(e) is not None for e in nlp.functions)


def lp_basis_sensitivity(nlp, point, basis=None, cq=None):
    """Sensitivities of an LP through its basis matrix B of binding rows.

    With M = [[0, B'], [B, 0]] the inverse is [[0, B^-1], [B^-T, 0]], so
    J_x = -B^-1 N_2 and J_lambda = -B^-T N_1.
    """
    if not is_affine_in_x(nlp):
        raise NotAnLPError("objective or constraints are nonlinear in x")
    if cq is None:
        cq = check_cq(nlp, point)
    _require(cq, ("licq", "scs"))
    d = eval_derivatives(nlp, point.x, point.p)
    info = classify_active(nlp, point, bundle=d, check=False)
    active = list(info.active) if basis is None else [int(i) for i in basis]
    n, me = nlp.n, nlp.m_e
    B = np.vstack([d.g_x.reshape(me, n), d.h_x[active].reshape(-1, n)])
    if B.shape[0] != n:
        raise BasisError(f"{B.shape[0]} binding rows for {n} variables; the basis is not square "
                         "(degenerate LP, use the degenerate pipeline)")
    lag = lagrangian_from_bundle(d, point.y, point.z)
    N1 = lag.hess_xp
    N2 = np.vstack([d.g_p.reshape(me, nlp.ell), d.h_p[active].reshape(-1, nlp.ell)])
    F = lu_factor(B)
    Jx = -lu_solve(F, N2)
    Jl = -lu_solve(F, N1, trans=True)
    Jz = np.zeros((nlp.m_i, nlp.ell))
    Jz[active] = Jl[me:]
    return SensitivityResult(Jx, Jl[:me], Jz, "lp_basis", cq, info={"basis_rows": active})
