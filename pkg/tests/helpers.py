"""Fixture loading shared by the test modules."""

import functools

import numpy as np

from sensikit.data import load_problem
from sensikit.oracle import solve_nlp


@functools.lru_cache(maxsize=None)
def _solve(name, p):
    nlp = load_problem(name)
    return nlp, solve_nlp(nlp, np.array(p, dtype=float))


def solved(name, *p):
    """(nlp, Solution) for a bundled fixture at parameter p."""
    return _solve(name, tuple(float(v) for v in p))


def point(name, *p):
    nlp, sol = solved(name, *p)
    return nlp, sol.point
