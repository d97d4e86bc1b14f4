"""Vertex enumeration of {v : A v = b, v_S >= 0} by basic solutions."""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import GuardExceededError
from .linalg import independent_rows, rank
from .lp import OPTIMAL, LinearProgram, lp_solve

GUARD = 20
FEAS_TOL = 1e-9
DEDUP_TOL = 1e-7


@dataclass
class PolytopeVertices:
    vertices: list = field(default_factory=list)
    bases_tried: int = 0
    bases_feasible: int = 0
    bounded: bool = True
    exhaustive: bool = True

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def as_array(self, dim):
        if not self.vertices:
            return np.zeros((0, dim))
        return np.array(self.vertices)


def _dedupe(points):
    out = []
    for v in points:
        if all(np.max(np.abs(v - w)) > DEDUP_TOL for w in out):
            out.append(v)
    # deterministic lexicographic order
    out.sort(key=lambda v: tuple(np.round(v, 9)))
    return out


def _bounded(A, sign_idx, d):
    free = [j for j in range(d) if j not in set(sign_idx)]
    if free and (A.shape[0] == 0 or rank(A[:, free]) < len(free)):
        return False
    if not sign_idx:
        return True
    c = np.zeros(d)
    c[list(sign_idx)] = -1.0
    lb = np.full(d, -1.0)
    lb[list(sign_idx)] = 0.0
    res = lp_solve(LinearProgram(c, A, np.zeros(A.shape[0]), lb=lb, ub=np.ones(d)))
    return res.status == OPTIMAL and -res.objective <= 1e-9


def enumerate_vertices(A_eq, b_eq, sign_constrained_indices, guard=GUARD, chunk=4096):
    """All basic feasible solutions of the polyhedron, deduplicated.

    Raises :class:`GuardExceededError` when more than ``guard`` coordinates are
    sign constrained.
    """
    A = np.atleast_2d(np.asarray(A_eq, dtype=float))
    b = np.asarray(b_eq, dtype=float).reshape(-1)
    d = A.shape[1]
    if A.shape[0] == 0:
        A = np.zeros((0, d))
    S = sorted(int(i) for i in sign_constrained_indices)
    if len(S) > guard:
        raise GuardExceededError(
            f"{len(S)} sign-constrained coordinates exceed the guard of {guard}; "
            "run the degenerate pipeline with sampled vertices instead")
    rows = independent_rows(A) if A.shape[0] else []
    Ar, br = A[rows], b[rows]
    out = PolytopeVertices()
    if A.shape[0] and np.max(np.abs(A @ np.linalg.lstsq(Ar, br, rcond=None)[0] - b), initial=0.0) > 1e-9 * (1 + np.max(np.abs(b))):
        return out  # inconsistent equalities: empty set
    out.bounded = _bounded(A, S, d)
    k = d - len(rows)
    if k > len(S):
        return out  # lineality space: no vertices
    combos = list(itertools.combinations(S, k))
    out.bases_tried = len(combos)
    found = []
    r = len(rows)
    rhs = np.concatenate([br, np.zeros(k)])
    for start in range(0, len(combos), chunk):
        batch = combos[start:start + chunk]
        M = np.zeros((len(batch), d, d))
        M[:, :r, :] = Ar
        for t, Z in enumerate(batch):
            for s, j in enumerate(Z):
                M[t, r + s, j] = 1.0
        sv = np.linalg.svd(M, compute_uv=False)
        ok = sv[:, -1] > 1e-10 * np.maximum(sv[:, 0], 1e-300)
        if not ok.any():
            continue
        V = np.linalg.solve(M[ok], np.broadcast_to(rhs, (int(ok.sum()), d))[..., None])[..., 0]
        for v in V:
            if S and np.min(v[S]) < -FEAS_TOL:
                continue
            if np.max(np.abs(A @ v - b), initial=0.0) > 1e-8:
                continue
            if S:
                v = v.copy()
                v[S] = np.maximum(v[S], 0.0)
            found.append(v)
    out.bases_feasible = len(found)
    out.vertices = _dedupe(found)
    return out
