"""Finite-difference oracle: re-solve NLP(p) at perturbed parameters.

Re-solves are warm started from the base solution and polished on the active
set to about 1e-10, so difference quotients stay well below test tolerances.
"""

from dataclasses import dataclass, field

import numpy as np

from .barrier import find_interior, sumt_solve
from .errors import ActiveSetChangeError, NonConvergenceError, SensikitError
from .kkt import PrimalDualPoint, kkt_residual, refine_active_set
from .problem import eval_values


@dataclass(frozen=True)
class OracleConfig:
    central_step: float = 1e-4
    one_sided_steps: tuple = (1e-3, 1e-4, 1e-5)
    tol: float = 1e-10

    def __post_init__(self):
        steps = tuple(float(s) for s in self.one_sided_steps)
        if self.central_step <= 0 or any(s <= 0 for s in steps) or any(b >= a for a, b in zip(steps, steps[1:])):
            raise ValueError("oracle steps must be positive and decreasing")
        object.__setattr__(self, "one_sided_steps", steps)


@dataclass
class Solution:
    point: PrimalDualPoint
    working_set: tuple
    value: float


def _guess_active(point, r):
    # along the barrier path z_i * (-h_i) = r: active rows have z_i^2 > r
    return [i for i, zi in enumerate(point.z) if zi * zi > r]


def solve_nlp(nlp, p, x0=None, warm=None, tol=1e-10):
    """Local solution of NLP(p): warm-started polish, else SUMT then polish."""
    p = np.asarray(p, dtype=float).reshape(nlp.ell)
    if warm is not None:
        try:
            x, y, z, work = refine_active_set(nlp, warm.point.x, warm.point.y, warm.point.z, p,
                                              warm.working_set, tol=tol * 0.1)
            pt = PrimalDualPoint(x, y, z, p)
            if kkt_residual(nlp, pt).max() <= tol:
                return Solution(pt, tuple(work), eval_values(nlp, x, p)[0])
        except (SensikitError, np.linalg.LinAlgError):
            pass
    start = find_interior(nlp, p, x0 if x0 is not None else (None if warm is None else warm.point.x))
    pt, trail = sumt_solve(nlp, p, start)
    x, y, z, work = refine_active_set(nlp, pt.x, pt.y, pt.z, p, _guess_active(pt, trail[-1].r), tol=tol * 0.1)
    pt = PrimalDualPoint(x, y, z, p)
    res = kkt_residual(nlp, pt).max()
    if res > tol:
        raise NonConvergenceError(f"re-solve reached KKT residual {res:.3e} only", x)
    return Solution(pt, tuple(work), eval_values(nlp, x, p)[0])


def _stack(sol):
    pt = sol.point
    return pt.x, pt.y, pt.z


def fd_jacobian(nlp, p, config=OracleConfig(), base=None):
    """Central-difference estimates of J_p x, J_p y, J_p z.

    Raises ActiveSetChangeError when the working set differs across the stencil.
    """
    p = np.asarray(p, dtype=float).reshape(nlp.ell)
    base = base or solve_nlp(nlp, p, tol=config.tol)
    Jx = np.zeros((nlp.n, nlp.ell))
    Jy = np.zeros((nlp.m_e, nlp.ell))
    Jz = np.zeros((nlp.m_i, nlp.ell))
    for k in range(nlp.ell):
        step = config.central_step * (1.0 + abs(p[k]))
        e = np.zeros(nlp.ell)
        e[k] = step
        plus = solve_nlp(nlp, p + e, warm=base, tol=config.tol)
        minus = solve_nlp(nlp, p - e, warm=base, tol=config.tol)
        if not (plus.working_set == minus.working_set == base.working_set):
            raise ActiveSetChangeError(
                f"active set changes inside the stencil for parameter {k + 1}: "
                f"{list(minus.working_set)} / {list(base.working_set)} / {list(plus.working_set)}")
        for J, a, b in zip((Jx, Jy, Jz), _stack(plus), _stack(minus)):
            J[:, k] = (a - b) / (2.0 * step)
    return Jx, Jy, Jz


@dataclass
class DirectionalEstimate:
    steps: tuple
    quotients: list
    value_quotients: list
    estimate: np.ndarray
    value_estimate: float
    monotone: bool
    working_sets: list = field(default_factory=list)


def fd_directional(nlp, p, h, config=OracleConfig(), base=None):
    """One-sided quotients (x(p + t h) - x(p)) / t on the configured step ladder."""
    p = np.asarray(p, dtype=float).reshape(nlp.ell)
    h = np.asarray(h, dtype=float).reshape(nlp.ell)
    steps = config.one_sided_steps
    if not np.any(h):
        zeros = [np.zeros(nlp.n) for _ in steps]
        return DirectionalEstimate(steps, zeros, [0.0] * len(steps), np.zeros(nlp.n), 0.0, True)
    base = base or solve_nlp(nlp, p, tol=config.tol)
    qs, vq, sets = [], [], []
    for t in steps:
        sol = solve_nlp(nlp, p + t * h, warm=base, tol=config.tol)
        qs.append((sol.point.x - base.point.x) / t)
        vq.append((sol.value - base.value) / t)
        sets.append(sol.working_set)
    diffs = [np.max(np.abs(a - b)) for a, b in zip(qs, qs[1:])]
    monotone = all(b <= a + 1e-12 for a, b in zip(diffs, diffs[1:]))
    return DirectionalEstimate(steps, qs, vq, qs[-1], vq[-1], monotone, sets)


def fd_value(nlp, p, step=1e-3, config=OracleConfig(), base=None):
    """Central-difference gradient and Hessian of the re-solved value function."""
    p = np.asarray(p, dtype=float).reshape(nlp.ell)
    base = base or solve_nlp(nlp, p, tol=config.tol)
    ell = nlp.ell

    def phi(q):
        return solve_nlp(nlp, q, warm=base, tol=config.tol).value

    grad = np.zeros(ell)
    hess = np.zeros((ell, ell))
    E = np.eye(ell) * step
    for i in range(ell):
        fp, fm = phi(p + E[i]), phi(p - E[i])
        grad[i] = (fp - fm) / (2 * step)
        hess[i, i] = (fp - 2 * base.value + fm) / step ** 2
        for j in range(i):
            hess[i, j] = hess[j, i] = (phi(p + E[i] + E[j]) - phi(p + E[i] - E[j])
                                       - phi(p - E[i] + E[j]) + phi(p - E[i] - E[j])) / (4 * step ** 2)
    return grad, hess
