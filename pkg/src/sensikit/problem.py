"""Parametric NLP container and AD-backed derivative evaluation."""

from dataclasses import dataclass

import numpy as np

from . import dual
from .errors import DimensionError
from .expr import check_indices, evaluate


@dataclass(frozen=True)
class ParametricNLP:
    """min f(x, p) s.t. g(x, p) = 0, h(x, p) <= 0."""

    n: int
    ell: int
    objective: object
    equalities: tuple = ()
    inequalities: tuple = ()
    name: str = "problem"
    var_names: tuple = None
    param_names: tuple = None
    default_p: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "equalities", tuple(self.equalities))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        if self.var_names is None:
            object.__setattr__(self, "var_names", tuple(f"x{i + 1}" for i in range(self.n)))
        if self.param_names is None:
            object.__setattr__(self, "param_names", tuple(f"p{i + 1}" for i in range(self.ell)))
        if len(self.var_names) != self.n or len(self.param_names) != self.ell:
            raise DimensionError("declared names do not match dimensions")
        for e in self.functions:
            check_indices(e, self.n, self.ell)

    @property
    def m_e(self):
        return len(self.equalities)

    @property
    def m_i(self):
        return len(self.inequalities)

    @property
    def functions(self):
        return (self.objective,) + self.equalities + self.inequalities

    @property
    def overdetermined(self):
        """More equalities than variables: LICQ can never hold."""
        return self.m_e > self.n

    def p_default(self):
        if self.default_p is None:
            return np.zeros(self.ell)
        return np.array(self.default_p, dtype=float)


@dataclass(frozen=True)
class DerivativeBundle:
    """Values and first/second derivatives of f, g, h at (x, p).

    Hessian blocks of the constraints are stacked along the first axis, so
    ``g_xx[i]`` is the n-by-n Hessian of g_i.
    """

    f: float
    g: np.ndarray
    h: np.ndarray
    f_x: np.ndarray
    f_p: np.ndarray
    g_x: np.ndarray
    g_p: np.ndarray
    h_x: np.ndarray
    h_p: np.ndarray
    f_xx: np.ndarray
    f_xp: np.ndarray
    f_pp: np.ndarray
    g_xx: np.ndarray
    g_xp: np.ndarray
    g_pp: np.ndarray
    h_xx: np.ndarray
    h_xp: np.ndarray
    h_pp: np.ndarray


def _check_point(nlp, x, p):
    x = np.asarray(x, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    if x.size != nlp.n or p.size != nlp.ell:
        raise DimensionError(f"expected x in R^{nlp.n} and p in R^{nlp.ell}, got {x.size} and {p.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
        raise ValueError("x and p must be finite")
    return x, p


def eval_values(nlp, x, p):
    """(f, g, h) as floats and arrays, no derivatives."""
    x, p = _check_point(nlp, x, p)
    xs, ps = list(x), list(p)
    f = float(evaluate(nlp.objective, xs, ps))
    g = np.array([evaluate(e, xs, ps) for e in nlp.equalities], dtype=float)
    h = np.array([evaluate(e, xs, ps) for e in nlp.inequalities], dtype=float)
    return f, g, h


def eval_first_order(nlp, x, p):
    """Values and joint (x, p) gradients of every function, one forward pass.

    Returns ``(values, J)`` with ``J`` of shape (1 + m_e + m_i, n + l).
    """
    x, p = _check_point(nlp, x, p)
    N = nlp.n + nlp.ell
    point = np.concatenate([x, p])
    lifted = []
    for i, v in enumerate(point):
        e = np.zeros(N)
        e[i] = 1.0
        lifted.append(dual.Dual(float(v), e))
    xs, ps = lifted[: nlp.n], lifted[nlp.n:]
    vals = np.empty(len(nlp.functions))
    J = np.zeros((len(nlp.functions), N))
    for k, e in enumerate(nlp.functions):
        out = evaluate(e, xs, ps)
        if isinstance(out, dual.Dual):
            vals[k] = out.a
            J[k] = out.b
        else:
            vals[k] = out
    return vals, J


def _second_order(nlp, x, p):
    N = nlp.n + nlp.ell
    point = np.concatenate([x, p])
    K = len(nlp.functions)
    vals = np.empty(K)
    grads = np.zeros((K, N))
    hess = np.zeros((K, N, N))
    for j in range(N):
        lifted = dual.seed_second_order(point, j)
        xs, ps = lifted[: nlp.n], lifted[nlp.n:]
        for k, e in enumerate(nlp.functions):
            v, gvec, hcol = dual.unpack_second_order(evaluate(e, xs, ps), N)
            hess[k, :, j] = hcol
            if j == 0:
                vals[k], grads[k] = v, gvec
    if N == 0:
        vals = np.array([float(evaluate(e, [], [])) for e in nlp.functions])
    # exact symmetry: (a + b) / 2 is bitwise commutative
    hess = 0.5 * (hess + np.transpose(hess, (0, 2, 1)))
    return vals, grads, hess


def eval_derivatives(nlp, x, p):
    """Full :class:`DerivativeBundle` at (x, p)."""
    x, p = _check_point(nlp, x, p)
    n, me = nlp.n, nlp.m_e
    vals, grads, hess = _second_order(nlp, x, p)
    gx, gp = grads[:, :n], grads[:, n:]
    hxx, hxp, hpp = hess[:, :n, :n], hess[:, :n, n:], hess[:, n:, n:]
    ge = slice(1, 1 + me)
    hi = slice(1 + me, None)
    return DerivativeBundle(
        f=float(vals[0]), g=vals[ge].copy(), h=vals[hi].copy(),
        f_x=gx[0].copy(), f_p=gp[0].copy(),
        g_x=gx[ge].copy(), g_p=gp[ge].copy(),
        h_x=gx[hi].copy(), h_p=gp[hi].copy(),
        f_xx=hxx[0].copy(), f_xp=hxp[0].copy(), f_pp=hpp[0].copy(),
        g_xx=hxx[ge].copy(), g_xp=hxp[ge].copy(), g_pp=hpp[ge].copy(),
        h_xx=hxx[hi].copy(), h_xp=hxp[hi].copy(), h_pp=hpp[hi].copy(),
    )


@dataclass(frozen=True)
class LagrangianDerivatives:
    grad_x: np.ndarray
    hess_xx: np.ndarray
    hess_xp: np.ndarray
    grad_p: np.ndarray
    hess_pp: np.ndarray

    def __iter__(self):
        return iter((self.grad_x, self.hess_xx, self.hess_xp, self.grad_p, self.hess_pp))


def lagrangian_from_bundle(d, y, z):
    y = np.asarray(y, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    if y.size != d.g.size or z.size != d.h.size:
        raise DimensionError(f"multipliers must have sizes {d.g.size} and {d.h.size}")
    grad_x = d.f_x + d.g_x.T @ y + d.h_x.T @ z
    grad_p = d.f_p + d.g_p.T @ y + d.h_p.T @ z
    hxx = d.f_xx + np.tensordot(y, d.g_xx, axes=1) + np.tensordot(z, d.h_xx, axes=1)
    hxp = d.f_xp + np.tensordot(y, d.g_xp, axes=1) + np.tensordot(z, d.h_xp, axes=1)
    hpp = d.f_pp + np.tensordot(y, d.g_pp, axes=1) + np.tensordot(z, d.h_pp, axes=1)
    hxx = 0.5 * (hxx + hxx.T)
    hpp = 0.5 * (hpp + hpp.T)
    return LagrangianDerivatives(grad_x, hxx, hxp, grad_p, hpp)


def lagrangian_derivatives(nlp, x, y, z, p):
    """Derivatives of L = f + y'g + z'h at (x, y, z, p)."""
    return lagrangian_from_bundle(eval_derivatives(nlp, x, p), y, z)
