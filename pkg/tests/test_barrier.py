import numpy as np
import pytest

from helpers import point, solved
from sensikit.barrier import (barrier_kkt_point, barrier_kkt_sensitivity, barrier_sensitivity,
                              sumt_solve)
from sensikit.data import load_problem
from sensikit.errors import InfeasibleError
from sensikit.kkt import kkt_residual
from sensikit.parse import parse_problem
from sensikit.problem import eval_derivatives, lagrangian_derivatives
from sensikit.sensitivity import fiacco_jacobian


def test_sumt_p2_closed_form():
    nlp = load_problem("p2")
    pt, trail = sumt_solve(nlp, [0.5], x0=[0.0])
    assert abs(pt.x[0] - 0.5) <= 1e-5 and abs(pt.z[0] - 0.5) <= 1e-5
    assert [s.r for s in trail] == pytest.approx([10.0 ** -k for k in range(1, 8)])


def test_sumt_unconstrained_quadratic_one_stage():
    nlp = parse_problem("vars x1 x2\nminimize (x1 - 3)^2 + 2*(x2 + 1)^2 + x1*x2\n")
    pt, trail = sumt_solve(nlp, [], r_schedule=[1.0])
    H = np.array([[2.0, 1.0], [1.0, 4.0]])
    np.testing.assert_allclose(pt.x, np.linalg.solve(H, [6.0, -4.0]), atol=1e-10)
    assert trail[0].iterations <= 2


def test_sumt_p4_matches_oracle():
    nlp, sol = solved("p4", 0.0, 1.0)
    pt, _ = sumt_solve(nlp, [0.0, 1.0], x0=[1.0, 1.0])
    assert kkt_residual(nlp, pt).max() <= 1e-6
    np.testing.assert_allclose(pt.x, sol.point.x, atol=1e-6)


def test_sumt_requires_interior_start():
    with pytest.raises(InfeasibleError):
        sumt_solve(load_problem("p2"), [0.5], x0=[1.0])


def test_interior_and_multiplier_identity():
    nlp = load_problem("p3v")
    p = np.array([0.3])
    _, trail = sumt_solve(nlp, p, x0=[0.0])
    for state in trail:
        assert all(e["max_h"] < 0 for e in state.log)
        d = eval_derivatives(nlp, state.x, p)
        grad_L = lagrangian_derivatives(nlp, state.x, state.y, state.z, p).grad_x
        grad_W = d.f_x - state.r * (d.h_x.T @ (1.0 / d.h))
        assert np.max(np.abs(grad_L - grad_W)) <= 1e-10


def test_barrier_sensitivity_p1_limit():
    nlp, pt = point("p1", 0.0)
    _, trail = sumt_solve(nlp, [0.0], r_schedule=[1e-2, 1e-4, 1e-6])
    sens = barrier_sensitivity(nlp, trail[-1], [0.0])
    assert np.max(np.abs(sens.J_x - fiacco_jacobian(nlp, pt).J_x)) <= 1e-4


def test_barrier_sensitivity_p2_sweep_decreases():
    nlp = load_problem("p2")
    _, trail = sumt_solve(nlp, [0.5], x0=[0.0], r_schedule=[1e-2, 1e-3, 1e-4])
    errs = [abs(barrier_sensitivity(nlp, s, [0.5]).J_x[0, 0] - 1.0) for s in trail]
    assert errs[0] > errs[1] > errs[2]


def test_barrier_sensitivity_parameter_free_zero():
    nlp = parse_problem("vars x1\nparams p1\nminimize (x1 - 2)^2\nsubject_to\nineq: x1 - 1\n")
    _, trail = sumt_solve(nlp, [0.0], x0=[0.0], r_schedule=[1e-3])
    sens = barrier_sensitivity(nlp, trail[-1], [0.0])
    assert np.all(sens.J_x == 0) and np.all(sens.J_z == 0)


def test_barrier_kkt_limits():
    nlp, pt = point("p4", 0.0, 1.0)
    ref = fiacco_jacobian(nlp, pt)
    sens = barrier_kkt_sensitivity(nlp, pt, 1e-8)
    assert np.max(np.abs(sens.J_x - ref.J_x)) <= 1e-4
    nlp, pt = point("p2", 0.5)
    errs = [abs(barrier_kkt_sensitivity(nlp, pt, mu).J_x[0, 0] - 1.0) for mu in (1e-2, 1e-4)]
    assert errs[1] < errs[0]


def test_barrier_kkt_equality_only_is_fiacco():
    nlp, pt = point("p1", 0.0)
    bp = barrier_kkt_point(nlp, pt, 1e-3)
    assert bp.s.size == 0
    sens = barrier_kkt_sensitivity(nlp, bp, 1e-3)
    ref = fiacco_jacobian(nlp, pt)
    np.testing.assert_allclose(sens.J_x, ref.J_x, atol=1e-12)
    np.testing.assert_allclose(sens.J_y, ref.J_y, atol=1e-12)


def test_barrier_convergence_order():
    nlp = load_problem("p2")
    rs = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    _, trail = sumt_solve(nlp, [0.5], x0=[0.0], r_schedule=rs)
    errs = [np.hypot(s.x[0] - 0.5, s.z[0] - 0.5) for s in trail]
    slope = np.polyfit(np.log(rs), np.log(errs), 1)[0]
    assert slope >= 0.9
