import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from navier_bubbles.bubbles import (
    BubbleParams,
    Configuration,
    bubble_constant_cn,
    check_V_p_eps,
    constant_c2,
    constant_c2_closed_form,
    constant_S,
    constant_S_quarter,
    constants,
    critical_exponent,
    delta_bilaplacian_radial,
    delta_laplacian_radial,
    delta_radial,
    e_norm,
    eps_ij,
    nonlinearity_exponent,
    phi,
    project_bubble,
    project_configuration,
)
from navier_bubbles.grid import DomainError, ScalarField, integrate
from navier_bubbles.solvers import apply_laplacian, solve_laplacian_stage


def _radial_laplacian(expr, r, n):
    return sp.diff(expr, r, 2) + (n - 1) / r * sp.diff(expr, r)


def test_cn_for_n5():
    assert math.isclose(bubble_constant_cn(5), 105 ** 0.125, rel_tol=1e-15)


@pytest.mark.parametrize("n", [5, 6, 7, 9])
def test_closed_form_laplacians_match_symbolic(n):
    r, lam = sp.symbols("r lam", positive=True)
    cn = sp.Integer(n * (n - 4) * (n * n - 4)) ** sp.Rational(n - 4, 8)
    d = cn * (lam / (1 + lam**2 * r**2)) ** sp.Rational(n - 4, 2)
    lap = _radial_laplacian(d, r, n)
    bilap = _radial_laplacian(lap, r, n)
    f_lap = sp.lambdify((r, lam), lap)
    f_bilap = sp.lambdify((r, lam), bilap)
    for rv, lv in [(0.03, 7.0), (0.4, 2.0), (1.3, 0.5)]:
        assert math.isclose(delta_laplacian_radial(rv, lv, n), f_lap(rv, lv), rel_tol=1e-10)
        assert math.isclose(delta_bilaplacian_radial(rv, lv, n), f_bilap(rv, lv), rel_tol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(5, 12), st.floats(1e-3, 10), st.floats(0.1, 100))
def test_bubble_solves_critical_equation(n, r, lam):
    lhs = delta_bilaplacian_radial(r, lam, n)
    rhs = delta_radial(r, lam, n) ** nonlinearity_exponent(n)
    assert math.isclose(lhs, rhs, rel_tol=1e-10)


def test_c2_numeric_matches_beta_form():
    for n in (5, 6, 8):
        assert math.isclose(constant_c2(n), constant_c2_closed_form(n), rel_tol=1e-11)
    assert math.isclose(constant_c2(5), 16 * math.pi**2 / 105, rel_tol=1e-11)


@pytest.mark.parametrize("lam", [0.3, 1.0, 17.0])
def test_S_is_scale_invariant_and_formula_independent(lam):
    S1 = constant_S(5)
    assert math.isclose(constant_S(5, lam), S1, rel_tol=1e-10)
    assert math.isclose(constant_S_quarter(5, lam, "laplacian"), constant_S_quarter(5), rel_tol=1e-10)


def test_constants_bundle():
    c = constants(5)
    assert math.isclose(c.S, 1.12498e10, rel_tol=1e-5)
    assert math.isclose(c.b(2), 16 * c.S)
    assert c.level(0.5 * c.S) == 0
    assert c.level(c.S) == 1
    assert c.level(16 * c.S * (1 + 1e-9)) == 2
    assert set(c.to_dict()) >= {"n", "c_n", "c2", "S", "c1", "S_quarter", "provenance"}
    with pytest.raises(ValueError):
        constants(4)


def test_exponents():
    assert critical_exponent(5) == 10 and nonlinearity_exponent(5) == 9
    assert critical_exponent(8) == 4 and nonlinearity_exponent(8) == 3


@pytest.mark.parametrize("kwargs", [
    {"alphas": [0.5, 0.6], "centers": [[0, 0], [1, 0]], "lams": 2.0},
    {"alphas": [1.2, -0.2], "centers": [[0, 0], [1, 0]], "lams": 2.0},
    {"alphas": [0.5, 0.5], "centers": [[0, 0], [0, 0]], "lams": 2.0},
    {"alphas": [0.5, 0.5], "centers": [[0, 0], [1, 0]], "lams": [2.0, -1.0]},
    {"alphas": [0.5, 0.5], "centers": [[0, 0]], "lams": 2.0},
])
def test_configuration_validation(kwargs):
    with pytest.raises(ValueError):
        Configuration(**kwargs)


def test_bubble_params_reject_nonpositive_lambda():
    with pytest.raises(ValueError):
        BubbleParams(np.zeros(5), 0.0)


def test_configuration_is_read_only():
    c = Configuration.common([0.5, 0.5], [[0.0] * 5, [0.1] + [0.0] * 4], 3.0)
    assert c.p == 2 and math.isclose(c.d, 0.1)
    with pytest.raises(ValueError):
        c.alphas[0] = 1.0


def test_projection_satisfies_navier_problem(ball):
    b = BubbleParams(ball.center, 8.0)
    u = project_bubble(ball, b)
    rhs = ScalarField(ball, delta_radial(ball.radii, 8.0, 5) ** 9)
    v = solve_laplacian_stage(ball, rhs)
    assert u.values[-1] == 0 and v.values[-1] == 0
    # check each stage; applying Δ_h twice loses ~h^-4 eps to rounding
    lap_u = apply_laplacian(ball, u).values[:-1]
    np.testing.assert_allclose(lap_u, v.values[:-1], rtol=1e-6, atol=1e-9 * np.abs(v.values).max())
    lap_v = apply_laplacian(ball, v).values[:-1]
    np.testing.assert_allclose(lap_v, rhs.values[:-1], rtol=1e-6, atol=1e-9 * rhs.max())


def test_defect_is_nonnegative(ball):
    for lam in (2.0, 10.0, 60.0):
        assert phi(ball, BubbleParams(ball.center, lam)).min() > -1e-9


def test_projection_is_linear(box15):
    a1 = box15.center + np.array([2, 0, 0, 0, 0]) * box15.spacing
    a2 = box15.center - np.array([2, 0, 0, 0, 0]) * box15.spacing
    c = Configuration.common([0.3, 0.7], [a1, a2], 3.0)
    u = project_configuration(box15, c)
    v = project_bubble(box15, BubbleParams(a1, 3.0)) * 0.3 + project_bubble(box15, BubbleParams(a2, 3.0)) * 0.7
    assert np.max(np.abs(u.values - v.values)) < 1e-12 * np.max(np.abs(v.values))


def test_center_outside_is_rejected(box15):
    with pytest.raises(DomainError):
        project_bubble(box15, BubbleParams(np.full(5, 2.0), 3.0))


def test_energy_identity_holds_discretely(ball):
    b = BubbleParams(ball.center, 6.0)
    u = project_bubble(ball, b)
    lhs = e_norm(ball, u) ** 2
    src = ScalarField(ball, delta_radial(ball.radii, 6.0, 5) ** 9)
    assert math.isclose(lhs, integrate(src * u), rel_tol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0, 2))
def test_eps_ij_symmetric_and_bounded(li, lj, dist):
    bi = BubbleParams(np.zeros(5), li)
    bj = BubbleParams(np.array([dist, 0, 0, 0, 0]), lj)
    e = eps_ij(bi, bj)
    assert math.isclose(e, eps_ij(bj, bi), rel_tol=1e-14)
    assert 0 < e <= 0.5 + 1e-15


def test_V_membership_on_ball(ball):
    c = Configuration.common([1.0], [ball.center], 100.0)
    u = project_configuration(ball, c)
    rep = check_V_p_eps(ball, c, 0.05, u / e_norm(ball, u))
    assert rep.satisfied and rep.e_distance < 1e-12
    narrow = check_V_p_eps(ball, Configuration.common([1.0], [ball.center], 10.0), 0.05)
    assert not narrow.satisfied
    with pytest.raises(ValueError):
        check_V_p_eps(ball, c, 0.0)
