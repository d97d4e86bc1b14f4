"""Predictor-corrector tracking of the solution along p(t) = p + t (p' - p)."""

from dataclasses import dataclass, field

import numpy as np

from .directional import degenerate_directional, dempe_lp, directional_qp
from .errors import (CorrectorDivergenceError, NonConvergenceError, NotStationaryError,
                     RegularityError, SensikitError)
from .kkt import (EPS_ACT, STATIONARY_TOL, PrimalDualPoint, build_multiplier_polytope, check_cq,
                  classify_active, kkt_residual, refine_active_set)
from .problem import eval_derivatives
from .sensitivity import build_fiacco_system, forward_sensitivity

CORRECTOR_TOL = 1e-8
MAX_CORRECTOR = 10
MIN_STEP = 1.0 / 2 ** 12


@dataclass
class HomotopySchedule:
    p_start: np.ndarray
    p_end: np.ndarray
    breakpoints: np.ndarray

    def __post_init__(self):
        self.p_start = np.asarray(self.p_start, dtype=float).reshape(-1)
        self.p_end = np.asarray(self.p_end, dtype=float).reshape(self.p_start.size)
        t = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        if t.size < 2 or t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        self.breakpoints = t

    @classmethod
    def uniform(cls, p_start, p_end, steps):
        if int(steps) < 1:
            raise ValueError("at least one step is required")
        return cls(p_start, p_end, np.linspace(0.0, 1.0, int(steps) + 1))

    def p_at(self, t):
        if t == 1.0:
            return self.p_end.copy()
        return self.p_start + t * (self.p_end - self.p_start)

    def perturbations(self):
        """h_(m) = (t_(m+1) - t_(m)) (p' - p)."""
        return [(b - a) * (self.p_end - self.p_start) for a, b in zip(self.breakpoints, self.breakpoints[1:])]


@dataclass
class PathStep:
    t: float
    point: PrimalDualPoint
    regime: str
    active: tuple
    added: tuple = ()
    dropped: tuple = ()
    corrector_iterations: int = 0
    predictor_error: float = 0.0
    dempe_vertices: list = field(default_factory=list)

    def as_dict(self):
        return {"t": self.t, "p": self.point.p.tolist(), "x": self.point.x.tolist(),
                "y": self.point.y.tolist(), "z": self.point.z.tolist(), "regime": self.regime,
                "active": list(self.active), "added": list(self.added), "dropped": list(self.dropped),
                "corrector_iterations": self.corrector_iterations,
                "predictor_error": self.predictor_error,
                "dempe_vertices": [np.asarray(v).tolist() for v in self.dempe_vertices]}


@dataclass
class PathTrace:
    steps: list = field(default_factory=list)
    halvings: int = 0

    @property
    def final(self):
        return self.steps[-1].point

    def active_changes(self):
        """(p before, p after, added, dropped) for every step that changed the active set."""
        out = []
        for a, b in zip(self.steps, self.steps[1:]):
            if b.added or b.dropped:
                out.append((a.point.p.copy(), b.point.p.copy(), b.added, b.dropped))
        return out

    def as_dict(self):
        return {"halvings": self.halvings, "steps": [s.as_dict() for s in self.steps]}


def _choose_regime(cq):
    if cq.licq and cq.scs and cq.sosc_subspace:
        return "fiacco"
    if cq.licq and cq.ssosc_subspace:
        return "directional"
    if cq.mfcq and cq.crcq_sampled and cq.gssosc_subspace:
        return "degenerate"
    raise RegularityError("neither LICQ nor MFCQ-based regularity is certified along the path",
                          failed=("LICQ", "MFCQ"))


def taylor_update(nlp, point, h, cq=None):
    """First-order prediction of the solution at p + h.

    Returns (predicted point, info) where info holds the regime, dx, the
    predicted working set and the multiplier vertices chosen by the Dempe LP.
    """
    h = np.asarray(h, dtype=float).reshape(nlp.ell)
    info = classify_active(nlp, point)
    if not np.any(h):
        return point, {"regime": "none", "dx": np.zeros(nlp.n), "working": list(info.active), "vertices": []}
    if cq is None:
        cq = check_cq(nlp, point)
    regime = _choose_regime(cq)
    y, z = point.y.copy(), point.z.copy()
    vertices = []
    if regime == "fiacco":
        d = eval_derivatives(nlp, point.x, point.p)
        w = forward_sensitivity(build_fiacco_system(nlp, point, info.active, d), h)
        dx = w[:nlp.n]
        y = y + w[nlp.n:nlp.n + nlp.m_e]
        z[list(info.active)] += w[nlp.n + nlp.m_e:]
    elif regime == "directional":
        res = directional_qp(nlp, point, h, cq=cq)
        dx, y, z = res.dx, y + res.dy, z + res.dz
    else:
        res = degenerate_directional(nlp, point, h, cq=cq)
        dx = res.dx
        # duals follow the multiplier vertex selected by the Dempe LP
        poly = build_multiplier_polytope(nlp, point.x, point.p, info.active)
        y, z = dempe_lp(nlp, point, poly, h)[0]
        vertices = res.selected_vertices
    d = eval_derivatives(nlp, point.x, point.p)
    lin = d.h_x @ dx + d.h_p @ h if nlp.m_i else np.zeros(0)
    tol = EPS_ACT * (1.0 + np.max(np.abs(dx), initial=0.0) + np.max(np.abs(h), initial=0.0))
    working = [i for i in info.active if lin[i] >= -tol]
    z = np.maximum(z, 0.0)
    pred = PrimalDualPoint(point.x + dx, y, z, point.p + h)
    return pred, {"regime": regime, "dx": dx, "working": working, "vertices": vertices}


def _correct(nlp, pred, working, tol):
    stats = {}
    x, y, z, work = refine_active_set(nlp, pred.x, pred.y, pred.z, pred.p, working, tol=tol, stats=stats)
    pt = PrimalDualPoint(x, y, z, pred.p)
    if kkt_residual(nlp, pt).max() > STATIONARY_TOL:
        raise NonConvergenceError("corrector finished with a large KKT residual", x)
    return pt, stats.get("newton", 0)


def follow_path(nlp, start, schedule, adaptive=True, tol=CORRECTOR_TOL, max_corrector=MAX_CORRECTOR):
    """Track the solution from schedule.p_start to schedule.p_end."""
    res = kkt_residual(nlp, start)
    if res.max() > STATIONARY_TOL:
        raise NotStationaryError(f"start point has KKT residual {res.max():.3e}", residual=res)
    if not np.allclose(start.p, schedule.p_start):
        raise ValueError("start point is not at the schedule's starting parameter")
    trace = PathTrace([PathStep(0.0, start, "start", classify_active(nlp, start).active)])
    pending = list(schedule.breakpoints[1:])
    t_cur, cur = 0.0, start
    while pending:
        t_next = pending[0]
        h = schedule.p_at(t_next) - cur.p
        err = None
        try:
            pred, info = taylor_update(nlp, cur, h)
            new, iters = _correct(nlp, pred, info["working"], tol)
        except RegularityError:
            raise
        except (SensikitError, np.linalg.LinAlgError) as exc:
            new, iters, err = None, None, exc
        slow = new is not None and iters > max_corrector
        if new is None or (adaptive and slow):
            if adaptive and t_next - t_cur > MIN_STEP:
                pending.insert(0, 0.5 * (t_cur + t_next))
                trace.halvings += 1
                continue
            reason = f"corrector needed {iters} iterations" if err is None else f"corrector failed ({err})"
            raise CorrectorDivergenceError(f"path step to t={t_next:.6g}: {reason}", trace, len(trace.steps))
        before = set(trace.steps[-1].active)
        active = classify_active(nlp, new).active
        trace.steps.append(PathStep(
            float(t_next), new, info["regime"], active,
            added=tuple(sorted(set(active) - before)), dropped=tuple(sorted(before - set(active))),
            corrector_iterations=iters,
            predictor_error=float(np.max(np.abs(new.x - pred.x), initial=0.0)),
            dempe_vertices=info["vertices"]))
        pending.pop(0)
        t_cur, cur = t_next, new
    return trace
