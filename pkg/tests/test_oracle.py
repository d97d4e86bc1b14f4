import numpy as np
import pytest

from helpers import solved
from sensikit.errors import ActiveSetChangeError
from sensikit.oracle import OracleConfig, fd_directional, fd_jacobian, fd_value
from sensikit.parse import parse_problem


def test_fd_jacobian_p1_closed_form():
    nlp, sol = solved("p1", 0.0)
    Jx, Jy, _ = fd_jacobian(nlp, np.array([0.0]), base=sol)
    np.testing.assert_allclose(Jx[:, 0], [0.5, 0.5], atol=1e-6)
    np.testing.assert_allclose(Jy[:, 0], [-0.5], atol=1e-6)


def test_fd_jacobian_parameter_free():
    nlp = parse_problem("vars x1\nparams p1\nminimize (x1 - 2)^2\nsubject_to\nineq: x1 - 1\n")
    Jx, _, Jz = fd_jacobian(nlp, np.array([0.4]))
    assert np.max(np.abs(Jx)) <= 1e-8 and np.max(np.abs(Jz)) <= 1e-8


def test_fd_jacobian_detects_kink():
    nlp, sol = solved("p2", 1.0)
    with pytest.raises(ActiveSetChangeError):
        fd_jacobian(nlp, np.array([1.0]), base=sol)


@pytest.mark.parametrize("h,expected", [(1.0, 0.0), (-1.0, -1.0)])
def test_fd_directional_p2_kink(h, expected):
    nlp, sol = solved("p2", 1.0)
    est = fd_directional(nlp, np.array([1.0]), np.array([h]), base=sol)
    assert abs(est.estimate[0] - expected) <= 1e-3
    assert len(est.quotients) == 3


def test_fd_directional_zero_direction():
    nlp, sol = solved("p4", 0.0, 1.0)
    est = fd_directional(nlp, np.array([0.0, 1.0]), np.zeros(2), base=sol)
    assert np.all(est.estimate == 0.0) and est.value_estimate == 0.0


def test_oracle_self_consistency_p4():
    nlp, sol = solved("p4", 0.0, 1.0)
    p = np.array([0.0, 1.0])
    Jx, _, _ = fd_jacobian(nlp, p, base=sol)
    h = np.array([0.3, -0.7])
    est = fd_directional(nlp, p, h, base=sol)
    np.testing.assert_allclose(est.estimate, Jx @ h, atol=1e-3)


def test_fd_value_p1():
    nlp, sol = solved("p1", 0.0)
    grad, hess = fd_value(nlp, np.array([0.0]), base=sol)
    assert grad[0] == pytest.approx(0.5, abs=1e-6) and hess[0, 0] == pytest.approx(0.5, abs=1e-4)


def test_config_steps_decreasing():
    cfg = OracleConfig()
    assert list(cfg.one_sided_steps) == sorted(cfg.one_sided_steps, reverse=True)
    assert all(s > 0 for s in cfg.one_sided_steps)
