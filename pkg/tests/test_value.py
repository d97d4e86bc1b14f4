import numpy as np
import pytest

from helpers import point, solved
from sensikit.errors import RegimeError, StructureError
from sensikit.kkt import PrimalDualPoint
from sensikit.oracle import fd_directional, fd_value, solve_nlp
from sensikit.parse import parse_problem
from sensikit.sensitivity import SensitivityResult
from sensikit.value import (dini_bounds, shadow_prices, value_directional, value_gradient_hessian,
                            value_gradient_objective_only)


def test_value_p1_closed_form():
    nlp, pt = point("p1", 0.0)
    rep = value_gradient_hessian(nlp, pt)
    assert rep.gradient == pytest.approx([0.5])
    np.testing.assert_allclose(rep.hessian, [[0.5]], atol=1e-12)
    assert rep.phi == pytest.approx(0.25)


@pytest.mark.parametrize("name,p", [("p1", (0.0,)), ("p4", (0.0, 1.0))])
def test_value_matches_fd(name, p):
    nlp, sol = solved(name, *p)
    rep = value_gradient_hessian(nlp, sol.point)
    grad, hess = fd_value(nlp, np.array(p), base=sol)
    np.testing.assert_allclose(rep.gradient, grad, atol=1e-4)
    np.testing.assert_allclose(rep.hessian, hess, atol=1e-4)
    assert rep.asymmetry <= 1e-7


def test_value_hessian_is_fd_of_gradient_p4():
    nlp, sol = solved("p4", 0.0, 1.0)
    p, t = np.array([0.0, 1.0]), 1e-4
    H = np.zeros((2, 2))
    for k in range(2):
        e = np.eye(2)[k] * t
        gp = value_gradient_hessian(nlp, solve_nlp(nlp, p + e, warm=sol).point).gradient
        gm = value_gradient_hessian(nlp, solve_nlp(nlp, p - e, warm=sol).point).gradient
        H[:, k] = (gp - gm) / (2 * t)
    np.testing.assert_allclose(value_gradient_hessian(nlp, sol.point).hessian, H, atol=1e-4)


def test_value_parameter_free_gradient_zero():
    nlp = parse_problem("vars x1\nparams p1\nminimize (x1 - 2)^2\nsubject_to\nineq: x1 - 1\n")
    rep = value_gradient_hessian(nlp, PrimalDualPoint([1.0], [], [2.0], [0.0]))
    assert rep.gradient == pytest.approx([0.0])


def test_value_rejects_other_regime():
    nlp, pt = point("p1", 0.0)
    sens = SensitivityResult(np.zeros((2, 1)), np.zeros((1, 1)), np.zeros((0, 1)), "barrier")
    with pytest.raises(RegimeError):
        value_gradient_hessian(nlp, pt, sens)


ENVELOPE = "vars x1\nparams p1\nminimize (x1 - p1)^2\nsubject_to\nineq: -x1\n"


def test_objective_only_interior_envelope():
    nlp = parse_problem(ENVELOPE)
    pt = solve_nlp(nlp, np.array([0.7])).point
    assert value_gradient_objective_only(nlp, pt).gradient == pytest.approx([0.0], abs=1e-8)


def test_objective_only_boundary_matches_fd():
    nlp = parse_problem(ENVELOPE)
    sol = solve_nlp(nlp, np.array([-1.0]))
    rep = value_gradient_objective_only(nlp, sol.point)
    grad, hess = fd_value(nlp, np.array([-1.0]), base=sol)
    assert rep.gradient == pytest.approx(grad, abs=1e-6)
    assert rep.gradient == pytest.approx([-2.0])
    assert rep.hessian == pytest.approx(hess, abs=1e-4)


def test_objective_only_rejects_parametric_constraints():
    nlp, pt = point("p2", 0.5)
    with pytest.raises(StructureError):
        value_gradient_objective_only(nlp, pt)


@pytest.mark.parametrize("name,p", [("p1", 0.0), ("p2", 0.5)])
def test_shadow_prices_signs_and_paths(name, p):
    nlp, sol = solved(name, p)
    pt = sol.point
    rep = shadow_prices(nlp, pt)
    expected = -(pt.y[0] if nlp.m_e else pt.z[0])
    assert rep.gradient[0] == pytest.approx(expected, abs=1e-12)
    assert rep.gradient == pytest.approx(value_gradient_hessian(nlp, pt).gradient, abs=1e-9)
    grad, _ = fd_value(nlp, np.array([p]), base=sol)
    assert rep.gradient == pytest.approx(grad, abs=1e-5)


def test_shadow_prices_inactive_component_zero():
    nlp = parse_problem("vars x1\nparams p1 p2\nminimize 0.5*(x1 - 1)^2\nsubject_to\n"
                        "ineq: x1 - p1\nineq: -x1 - p2\n")
    pt = solve_nlp(nlp, np.array([0.5, 3.0])).point
    rep = shadow_prices(nlp, pt)
    assert rep.gradient[1] == 0.0 and rep.gradient[0] == pytest.approx(-0.5)


def test_shadow_prices_structure_errors():
    nlp = parse_problem("vars x1\nparams p1\nminimize x1^2\nsubject_to\nineq: p1*x1 - 1\n")
    with pytest.raises(StructureError, match="ineq row 1"):
        shadow_prices(nlp, PrimalDualPoint([0.0], [], [0.0], [1.0]))
    nlp = parse_problem("vars x1\nparams p1\nminimize x1^2\nsubject_to\nineq: x1 - p1\nineq: -x1 - p1\n")
    with pytest.raises(StructureError, match="more than once"):
        shadow_prices(nlp, PrimalDualPoint([0.0], [], [0.0, 0.0], [0.0]))


def test_value_directional_singleton_and_zero():
    nlp, pt = point("p4", 0.0, 1.0)
    h = np.array([0.4, -1.0])
    grad = value_gradient_hessian(nlp, pt).gradient
    assert value_directional(nlp, [pt], h) == pytest.approx(grad @ h, abs=1e-10)
    lo, hi = dini_bounds(nlp, [pt], h)
    assert lo == pytest.approx(hi, abs=1e-10) and hi == pytest.approx(grad @ h, abs=1e-10)
    assert value_directional(nlp, [pt], np.zeros(2)) == 0.0


@pytest.mark.parametrize("h,lo,hi", [(1.0, -2.0, -1.0), (-1.0, 1.0, 2.0)])
def test_variant_bounds_against_vertices_and_fd(h, lo, hi):
    # grad_p L = -z1 - 2 z2 over the vertices (1,0), (0,1)
    nlp, sol = solved("p3v", 0.0)
    lower, upper = dini_bounds(nlp, [sol.point], [h])
    assert (lower, upper) == (pytest.approx(lo), pytest.approx(hi))
    val = value_directional(nlp, [sol.point], [h])
    assert lower <= val <= upper
    est = fd_directional(nlp, np.array([0.0]), np.array([h]), base=sol)
    # the t = 1e-3 quotient carries a curvature term of 2e-3 (phi'' = 4 on the x = 1 + 2p branch)
    for t, q in zip(est.steps, est.value_quotients):
        if t <= 1e-4:
            assert lower - 1e-3 <= q <= upper + 1e-3
    assert lower - 1e-4 <= est.value_estimate <= upper + 1e-4


def test_value_directional_min_over_solutions():
    nlp, pt = point("p3v", 0.0)
    assert value_directional(nlp, [pt, pt], [1.0]) == pytest.approx(-1.0)
