import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sensikit.data import FIXTURES, load_problem
from sensikit.errors import DimensionError, DomainError, ParseError, UndeclaredIdentifierError
from sensikit.expr import Expr, apply, evaluate, to_text
from sensikit.parse import format_problem, parse_expression, parse_problem
from sensikit.problem import (ParametricNLP, eval_derivatives, eval_first_order, eval_values,
                              lagrangian_derivatives)

NLP_FIXTURES = [f for f in FIXTURES if f.startswith("p")]


def test_compact_form():
    nlp = parse_problem("minimize 0.5*(x1^2+x2^2) s.t. eq: x1+x2-1-p1")
    assert (nlp.n, nlp.ell, nlp.m_e, nlp.m_i) == (2, 1, 1, 0)


def test_undeclared_identifier_location():
    with pytest.raises(UndeclaredIdentifierError) as err:
        parse_problem("minimize x1 s.t. ineq: x9 - 1")
    assert err.value.line == 1 and err.value.column == 24


def test_syntax_error_location():
    with pytest.raises(ParseError) as err:
        parse_problem("vars x1\nparams p1\nminimize x1 +* p1\n")
    assert err.value.line == 3


def test_at_dimension_mismatch():
    with pytest.raises(DimensionError):
        parse_problem("vars x1\nparams p1\nminimize x1*p1\nat p = [1, 2]\n")


def test_p4_dimensions():
    nlp = load_problem("p4")
    assert (nlp.n, nlp.ell, nlp.m_e, nlp.m_i) == (2, 2, 1, 1)


@pytest.mark.parametrize("name", NLP_FIXTURES)
def test_fixture_round_trip(name):
    nlp = load_problem(name)
    text = format_problem(nlp)
    again = parse_problem(text)
    assert again == nlp
    assert format_problem(again) == text


def test_precedence():
    e = parse_expression("-x1^2", ["x1"], [])
    assert evaluate(e, [3.0], []) == -9.0
    e = parse_expression("2^3^2", [], [])
    assert evaluate(e, [], []) == pytest.approx(512.0, rel=1e-14)
    e = parse_expression("1 - 2 - 3", [], [])
    assert evaluate(e, [], []) == -4.0
    e = parse_expression("x1^-1", ["x1"], [])
    assert evaluate(e, [4.0], []) == 0.25


def test_domain_errors_name_subexpression():
    with pytest.raises(DomainError, match="log"):
        eval_values(parse_problem("minimize log(x1 - 1)"), [0.5], [])
    with pytest.raises(DomainError, match="division"):
        eval_values(parse_problem("minimize 1/x1"), [0.0], [])
    with pytest.raises(DomainError):
        eval_values(parse_problem("minimize x1^0.5"), [-1.0], [])


def test_index_check():
    with pytest.raises(DimensionError):
        ParametricNLP(1, 0, Expr.var(1))


def test_bilinear_blocks():
    d = eval_derivatives(parse_problem("minimize x1*p1"), [2.0], [3.0])
    assert d.f_x == pytest.approx([3.0]) and d.f_p == pytest.approx([2.0])
    np.testing.assert_allclose(d.f_xp, [[1.0]])


def test_quadratic_hessian():
    d = eval_derivatives(parse_problem("minimize x1^2 + 0*p1"), [1.0], [7.0])
    np.testing.assert_allclose(d.f_xx, [[2.0]])


def test_p4_blocks_at_reference_point():
    d = eval_derivatives(load_problem("p4"), [1.0, 1.0], [0.0, 1.0])
    assert d.f_x == pytest.approx([np.e, 2.0])
    assert d.f_p == pytest.approx([1.0, 0.0])
    np.testing.assert_allclose(d.f_xp, [[1.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(d.g_xx[0], [[0.0, 1.0], [1.0, 0.0]])
    assert d.g_p[0] == pytest.approx([0.0, -1.0])


def _fd_check(nlp, x, p):
    N = nlp.n + nlp.ell
    point = np.concatenate([x, p])
    vals, J = eval_first_order(nlp, x, p)
    d = eval_derivatives(nlp, x, p)
    H_ad = []
    for k in range(len(nlp.functions)):
        if k == 0:
            blocks = (d.f_xx, d.f_xp, d.f_pp)
        elif k <= nlp.m_e:
            blocks = (d.g_xx[k - 1], d.g_xp[k - 1], d.g_pp[k - 1])
        else:
            i = k - 1 - nlp.m_e
            blocks = (d.h_xx[i], d.h_xp[i], d.h_pp[i])
        H_ad.append(np.block([[blocks[0], blocks[1]], [blocks[1].T, blocks[2]]]))
    for j in range(N):
        step = 1e-5 * (1.0 + abs(point[j]))
        e = np.zeros(N)
        e[j] = step
        vp, Jp = eval_first_order(nlp, (point + e)[: nlp.n], (point + e)[nlp.n:])
        vm, Jm = eval_first_order(nlp, (point - e)[: nlp.n], (point - e)[nlp.n:])
        grad_fd = (vp - vm) / (2 * step)
        hess_fd = (Jp - Jm) / (2 * step)
        assert np.all(np.abs(grad_fd - J[:, j]) <= 1e-6 * (1 + np.abs(J[:, j])))
        for k in range(len(nlp.functions)):
            assert np.all(np.abs(hess_fd[k] - H_ad[k][:, j]) <= 1e-6 * (1 + np.abs(H_ad[k][:, j])))
        for k, H in enumerate(H_ad):
            assert np.array_equal(H, H.T)


@pytest.mark.parametrize("name", NLP_FIXTURES)
def test_ad_matches_finite_differences(name):
    nlp = load_problem(name)
    rng = np.random.default_rng(hash(name) % 2**32)
    for _ in range(100):
        x = rng.uniform(-1.5, 1.5, nlp.n)
        p = rng.uniform(-1.5, 1.5, nlp.ell)
        _fd_check(nlp, x, p)


def test_lagrangian_identities():
    nlp = load_problem("p1")
    gx, hxx, hxp, gp, hpp = lagrangian_derivatives(nlp, [0.5, 0.5], [-0.5], [], [0.0])
    assert gx == pytest.approx([0.0, 0.0])
    assert np.array_equal(hxx, np.eye(2))
    d = eval_derivatives(nlp, [0.3, 0.1], [0.2])
    gx0 = lagrangian_derivatives(nlp, [0.3, 0.1], [0.0], [], [0.2]).grad_x
    assert np.array_equal(gx0, d.f_x)


# random expressions for the print/parse fixed point
_leaf = st.one_of(
    st.floats(-5, 5, allow_nan=False).map(lambda c: Expr.const(round(c, 3))),
    st.integers(0, 2).map(Expr.var),
    st.integers(0, 1).map(Expr.param),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["add", "sub", "mul", "div", "pow"]), children, children).map(
            lambda t: Expr(t[0], (t[1], t[2]))),
        st.tuples(st.sampled_from(["neg", "sin", "cos", "exp", "log", "sqrt"]), children).map(
            lambda t: Expr("neg", (t[1],)) if t[0] == "neg" else apply(t[0], t[1])),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(_leaf, _extend, max_leaves=12))
def test_print_parse_print_fixed_point(e):
    text = to_text(e)
    again = parse_expression(text, ["x1", "x2", "x3"], ["p1", "p2"])
    assert to_text(again) == text
