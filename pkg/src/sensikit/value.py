"""Derivatives of the optimal value function phi(p)."""

from dataclasses import dataclass, field

import numpy as np

from .errors import RegimeError, StructureError, UnboundedError
from .expr import to_text, uses_params
from .kkt import build_multiplier_polytope, classify_active
from .lp import OPTIMAL, UNBOUNDED, LinearProgram, lp_solve
from .problem import eval_derivatives, lagrangian_from_bundle
from .sensitivity import fiacco_jacobian

PARAM_FREE_TOL = 1e-12


@dataclass
class ValueReport:
    phi: float
    gradient: np.ndarray = None
    hessian: np.ndarray = None
    asymmetry: float = 0.0
    directional: dict = field(default_factory=dict)
    dini: dict = field(default_factory=dict)
    regime: str = "fiacco"

    def as_dict(self):
        arr = lambda a: None if a is None else np.asarray(a).tolist()
        return {"regime": self.regime, "phi": self.phi, "gradient": arr(self.gradient),
                "hessian": arr(self.hessian), "asymmetry": self.asymmetry,
                "directional": {k: float(v) for k, v in self.directional.items()},
                "dini": {k: [float(a), float(b)] for k, (a, b) in self.dini.items()}}


def _fiacco(nlp, point, sens):
    if sens is None:
        sens = fiacco_jacobian(nlp, point)
    if sens.regime != "fiacco":
        raise RegimeError(f"smooth value derivatives need a 'fiacco' sensitivity, got '{sens.regime}'")
    return sens


def _symmetrize(H):
    asym = float(np.max(np.abs(H - H.T), initial=0.0))
    return 0.5 * (H + H.T), asym


def value_gradient_hessian(nlp, point, sens=None):
    """grad phi = grad_p L and Hess phi = L_pp + L_pw J_p w at a regular point."""
    sens = _fiacco(nlp, point, sens)
    d = eval_derivatives(nlp, point.x, point.p)
    lag = lagrangian_from_bundle(d, point.y, point.z)
    ell = nlp.ell
    H = (lag.hess_pp + lag.hess_xp.T @ sens.J_x + d.g_p.reshape(-1, ell).T @ sens.J_y
         + d.h_p.reshape(-1, ell).T @ sens.J_z)
    H, asym = _symmetrize(H)
    return ValueReport(float(d.f), lag.grad_p.copy(), H, asym)


def value_gradient_objective_only(nlp, point, sens=None):
    """Envelope form when the constraints do not depend on p."""
    d = eval_derivatives(nlp, point.x, point.p)
    jp = np.concatenate([d.g_p.ravel(), d.h_p.ravel()])
    if np.max(np.abs(jp), initial=0.0) > PARAM_FREE_TOL:
        raise StructureError("constraints depend on the parameters; use value_gradient_hessian")
    sens = _fiacco(nlp, point, sens)
    H, asym = _symmetrize(d.f_pp + d.f_xp.T @ sens.J_x)
    return ValueReport(float(d.f), d.f_p.copy(), H, asym)


# -- canonical right-hand-side perturbations -------------------------------------

def _additive_terms(e, sign=1.0):
    """Flatten +, - and unary minus into (sign, term) pairs."""
    if e.op == "add":
        return _additive_terms(e.args[0], sign) + _additive_terms(e.args[1], sign)
    if e.op == "sub":
        return _additive_terms(e.args[0], sign) + _additive_terms(e.args[1], -sign)
    if e.op == "neg":
        return _additive_terms(e.args[0], -sign)
    return [(sign, e)]


def _param_coefficient(term):
    """(param index, coefficient) when the term is c*p_k, p_k*c or p_k; else None."""
    if term.op == "param":
        return term.value, 1.0
    if term.op == "mul":
        a, b = term.args
        if a.op == "const" and b.op == "param":
            return b.value, a.value
        if b.op == "const" and a.op == "param":
            return a.value, b.value
    return None


def canonical_structure(nlp):
    """Map parameter k to (kind, row, coefficient) for right-hand-side perturbations.

    Raises :class:`StructureError` naming the offending occurrence when a
    parameter is not a single additive, linear term of one constraint.
    """
    labels = nlp.param_names or [f"p{k + 1}" for k in range(nlp.ell)]
    if uses_params(nlp.objective):
        raise StructureError(f"objective depends on parameters: {to_text(nlp.objective)}")
    found = {}
    rows = [("eq", i, e) for i, e in enumerate(nlp.equalities)] + \
           [("ineq", i, e) for i, e in enumerate(nlp.inequalities)]
    for kind, i, e in rows:
        for sign, term in _additive_terms(e):
            if not uses_params(term):
                continue
            pc = _param_coefficient(term)
            where = f"{kind} row {i + 1}, term '{to_text(term)}'"
            if pc is None or pc[1] == 0.0:
                raise StructureError(f"parameter occurrence is not a linear right-hand side ({where})")
            k, coef = pc
            if k in found:
                raise StructureError(f"parameter {labels[k]} appears more than once ({where})")
            found[k] = (kind, i, sign * coef)
    missing = [labels[k] for k in range(nlp.ell) if k not in found]
    if missing:
        raise StructureError("parameters not attached to any constraint: " + ", ".join(missing))
    return found


def shadow_prices(nlp, point, sens=None):
    """Value gradient as signed multipliers; Hessian from the multiplier sensitivities."""
    structure = canonical_structure(nlp)
    sens = _fiacco(nlp, point, sens)
    ell = nlp.ell
    grad = np.zeros(ell)
    H = np.zeros((ell, ell))
    for k, (kind, i, coef) in structure.items():
        mult, jac = (point.y, sens.J_y) if kind == "eq" else (point.z, sens.J_z)
        grad[k] = coef * mult[i]
        H[k] = coef * jac[i]
    H, asym = _symmetrize(H)
    d = eval_derivatives(nlp, point.x, point.p)
    return ValueReport(float(d.f), grad, H, asym, regime="shadow_prices")


# -- directional and Dini bounds over multiplier sets -------------------------------

def _multiplier_extrema(nlp, point, h, index):
    """(min, max) of grad_p L(x, y, z, p)'h over the multiplier polytope at one solution."""
    d = eval_derivatives(nlp, point.x, point.p)
    active = classify_active(nlp, point, bundle=d).active
    poly = build_multiplier_polytope(nlp, point.x, point.p, active, bundle=d)
    base = float(d.f_p @ h)
    c = np.concatenate([d.g_p.reshape(-1, nlp.ell) @ h, d.h_p.reshape(-1, nlp.ell)[list(active)] @ h])
    if c.size == 0:
        return base, base
    A, b = poly.reduced()
    out = []
    for sgn in (1.0, -1.0):
        res = lp_solve(LinearProgram(sgn * c, A, b, lb=poly.sign_bounds()))
        if res.status == UNBOUNDED:
            raise UnboundedError(f"multiplier LP unbounded at solution {index} (MFCQ fails there)")
        if res.status != OPTIMAL:
            raise UnboundedError(f"multiplier LP has status {res.status} at solution {index}")
        out.append(base + float(c @ res.x))
    return out[0], out[1]


def _direction(nlp, h):
    return np.asarray(h, dtype=float).reshape(nlp.ell)


def value_directional(nlp, solutions, h):
    """min over supplied solutions of max over their multipliers of grad_p L'h."""
    h = _direction(nlp, h)
    if not np.any(h):
        return 0.0
    return min(_multiplier_extrema(nlp, pt, h, i)[1] for i, pt in enumerate(solutions))


def dini_bounds(nlp, solutions, h):
    """(lower, upper) bounds on the Dini derivatives of phi along h."""
    h = _direction(nlp, h)
    ext = [_multiplier_extrema(nlp, pt, h, i) for i, pt in enumerate(solutions)]
    return min(lo for lo, _ in ext), min(hi for _, hi in ext)
