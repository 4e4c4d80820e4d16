"""Acceptance suite: one recorded pass/fail line per criterion.

The lines are printed as each test runs and collected again in the pytest
terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest
import sympy as sp

from conftest import record
from navier_bubbles.bubbles import (
    BubbleParams,
    Configuration,
    constant_c2,
    constant_c2_closed_form,
    constant_S_quarter,
    constants,
    delta_bilaplacian_analytic,
    delta,
    nonlinearity_exponent,
    project_configuration,
)
from navier_bubbles.energy import check_upper_bounds, e_inner, evaluate_J, grad_J, verify_expansion
from navier_bubbles.fitting import fit_representation
from navier_bubbles.flow import CANNED, FlowParams, canned_initial, flow_run
from navier_bubbles.green import fit_loglog_slope, validate_lemma_a1
from navier_bubbles.grid import ScalarField, make_domain
from navier_bubbles.inequalities import scan_gamma, scan_jensen, scan_taylor
from navier_bubbles.solvers import apply_laplacian, navier_bilaplacian, poisson_dirichlet

# frozen regression bounds from the seeded scans (seed 0)
GAMMA_STAR_Q10 = 2.000009794530642
M_STAR_Q10 = 523.981850061887


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


# ---------------------------------------------------------------- 1


def _sympy_bilaplacian(n):
    r, lam = sp.symbols("r lam", positive=True)
    cn = sp.Integer(n * (n - 4) * (n * n - 4)) ** sp.Rational(n - 4, 8)
    d = cn * (lam / (1 + lam**2 * r**2)) ** sp.Rational(n - 4, 2)

    def lap(f):
        return sp.diff(f, r, 2) + (n - 1) / r * sp.diff(f, r)

    return sp.lambdify((r, lam), sp.simplify(lap(lap(d))), "numpy")


def test_criterion_1_bubble_exactness():
    syms = {n: _sympy_bilaplacian(n) for n in (5, 6)}

    def run():
        rng = np.random.default_rng(1)
        worst = 0.0
        for n, sym in syms.items():
            lam = 10 ** rng.uniform(-1, 2, size=100)
            a = rng.normal(size=(100, n))
            x = a + rng.normal(size=(100, n)) * rng.uniform(0.01, 3, size=(100, 1))
            rr = np.linalg.norm(x - a, axis=1)
            for k in range(100):
                b = BubbleParams(a[k], lam[k])
                lhs = delta_bilaplacian_analytic(b, x[k], n)
                rhs = delta(b, x[k], n) ** nonlinearity_exponent(n)
                symv = sym(rr[k], lam[k])
                worst = max(worst, abs(lhs - rhs) / abs(rhs), abs(symv - rhs) / abs(rhs))
        return worst

    worst, dt = _timed(run)
    ok = worst <= 1e-9 and dt < 1.0
    record("1", ok, f"max relative residual {worst:.2e} (n=5,6; 100 points each), {dt:.2f}s")
    assert ok


# ---------------------------------------------------------------- 2


def test_criterion_2_constants():
    def run():
        c2 = abs(constant_c2(5) / (16 * math.pi**2 / 105) - 1)
        c2b = abs(constant_c2(5) / constant_c2_closed_form(5) - 1)
        sp_, sl = constant_S_quarter(5, formula="power"), constant_S_quarter(5, formula="laplacian")
        return c2, c2b, abs(sp_ / sl - 1)

    (c2, c2b, gap), dt = _timed(run)
    ok = c2 <= 1e-8 and c2b <= 1e-8 and gap <= 1e-7 and dt < 5
    record("2", ok, f"c2 rel err {c2:.1e}, dual S^(1/4) gap {gap:.1e}, {dt:.2f}s")
    assert ok


# ---------------------------------------------------------------- 3


def _radial_manufactured(M):
    n = 5
    d = make_domain("ball", n, R=1.0, M=M)
    r = d.radii
    k = math.pi / 2
    u = np.cos(k * r)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = -k * k * np.cos(k * r) - (n - 1) * k * np.where(r > 0, np.sin(k * r) / r, k)
    uh, _ = poisson_dirichlet(d, ScalarField(d, f))
    return float(np.max(np.abs(uh.values - u)))


def test_criterion_3_solver_correctness():
    def run():
        d = make_domain("box", 5, side=1.0, N=15)
        rng = np.random.default_rng(3)
        u = ScalarField(d, rng.normal(size=d.shape))
        back, _ = poisson_dirichlet(d, apply_laplacian(d, u))
        rt = float(np.max(np.abs(back.values - u.values)) / np.max(np.abs(u.values)))
        lap2 = apply_laplacian(d, apply_laplacian(d, u))
        back2, _ = navier_bilaplacian(d, lap2)
        rt2 = float(np.max(np.abs(back2.values - u.values)) / np.max(np.abs(u.values)))
        Ms = [500, 1000, 2000]
        errs = [_radial_manufactured(M) for M in Ms]
        return rt, rt2, -fit_loglog_slope(Ms, errs), errs

    (rt, rt2, order, errs), dt = _timed(run)
    ok = rt <= 1e-11 and rt2 <= 1e-11 and abs(order - 2) <= 0.1 and dt < 10
    record("3", ok, f"box round trips {rt:.1e}/{rt2:.1e}, radial order {order:.3f}, {dt:.2f}s")
    assert ok


# ---------------------------------------------------------------- 4


def test_criterion_4_defect_decay():
    def run():
        d = make_domain("ball", 5, R=1.0, M=65537)
        return validate_lemma_a1(d, np.zeros(5), [20, 40, 80, 160])

    rep, dt = _timed(run)
    ok = abs(rep.slope + 2) <= 0.3 and dt < 30
    record("4", ok, f"slope {rep.slope:.4f} (target -2 +- 0.3), {dt:.2f}s")
    assert ok


# ---------------------------------------------------------------- 5


@pytest.fixture(scope="module")
def expansion_p1():
    d = make_domain("ball", 5, R=1.0, M=16385)
    c = Configuration.common([1.0], [np.zeros(5)], 20.0)
    return _timed(lambda: verify_expansion(d, c, [20, 40, 80, 160, 320]))


def _record_5(rep, dt):
    rel = abs(rep.fitted_coefficient / rep.predicted_coefficient - 1)
    ok_c, ok_o = rel <= 0.05 and dt < 120, rep.fitted_order <= -2.5
    record("5", ok_c and ok_o,
           f"coefficient rel err {rel:.2e} ({'PASS' if ok_c else 'FAIL'}); residual order "
           f"{rep.fitted_order:.3f} vs <= -2.5 ({'PASS' if ok_o else 'FAIL'}); {dt:.2f}s")
    return rel


def test_criterion_5_coefficient(expansion_p1):
    rep, dt = expansion_p1
    rel = _record_5(rep, dt)
    assert rel <= 0.05 and dt < 120


def test_criterion_5_residual_order(expansion_p1):
    rep, dt = expansion_p1
    _record_5(rep, dt)
    assert rep.fitted_order <= -2.5


# ---------------------------------------------------------------- 6, 7


@pytest.fixture(scope="module")
def pair_box():
    d = make_domain("box", 5, side=0.25, N=23)
    e0 = np.eye(5)[0] * 6 * d.spacing
    return d, np.stack([d.center + e0, d.center - e0])


@pytest.fixture(scope="module")
def expansion_p2(pair_box):
    d, cs = pair_box
    c = Configuration.common([0.5, 0.5], cs, 10.0)
    return _timed(lambda: verify_expansion(d, c, [10, 15, 20]))


def test_criterion_6_interaction_sign(expansion_p2):
    rep, dt = expansion_p2
    b2 = constants(5).b(2)
    meas = rep.J_num - b2
    pred = rep.psi - b2
    ratio = meas / pred
    sign_ok = bool(np.all(np.sign(meas) == np.sign(pred)))
    mag_ok = bool(np.all((ratio >= 0.5) & (ratio <= 2)))
    ok = sign_ok and mag_ok and dt < 1200
    record("6", ok, f"sign match {sign_ok}, measured/predicted {np.round(ratio, 3).tolist()}, "
           f"G12={rep.Gmat[0, 1]:.3f}, H={rep.Hdiag[0]:.3f}, {dt:.2f}s")
    assert ok


@pytest.fixture(scope="module")
def bounds_p2(pair_box):
    d, cs = pair_box
    lam = 20.0
    eq = check_upper_bounds(d, Configuration.common([0.5, 0.5], cs, lam), lam, eps=0.1, eps1=0.01)
    small = check_upper_bounds(d, Configuration.common([0.99, 0.01], cs, lam), lam, eps=0.1, eps1=0.01)
    return eq, small


def _record_7(eq, small):
    ok_large, ok_small = eq.large_lambda_ok, bool(small.small_weight_ok)
    record("7", ok_large and ok_small,
           f"J <= (2.1)^4 S: J/bound {eq.J / eq.large_lambda_bound:.3f} ({'PASS' if ok_large else 'FAIL'}); "
           f"weight 0.01, J <= 16 S: J/bound {small.J / small.small_weight_bound:.3f} ({'PASS' if ok_small else 'FAIL'})")


def test_criterion_7_large_lambda_bound(bounds_p2):
    eq, small = bounds_p2
    _record_7(eq, small)
    assert eq.large_lambda_ok


def test_criterion_7_small_weight_bound(bounds_p2):
    eq, small = bounds_p2
    _record_7(eq, small)
    assert small.small_weight_applicable and small.small_weight_ok


# ---------------------------------------------------------------- 8


def _sine_base(d):
    base = np.ones(d.shape)
    for g in d.axes():
        base = base * np.sin(math.pi * g)
    return base


def _random_quadratic(d, rng):
    xs = d.axes()
    out = rng.normal() + sum(rng.normal() * (x - 0.5) for x in xs)
    for i in range(d.n):
        for j in range(i, d.n):
            out = out + rng.normal() * (xs[i] - 0.5) * (xs[j] - 0.5)
    return np.broadcast_to(out, d.shape)


def _smooth_positive(d, rng):
    """Positive field vanishing on the boundary, without reflection symmetries."""
    return ScalarField(d, _sine_base(d) * np.exp(0.3 * _random_quadratic(d, rng)))


def _smooth(d, rng):
    return ScalarField(d, _sine_base(d) * _random_quadratic(d, rng))


def test_criterion_8_gradient_consistency(box15):
    def run():
        rng = np.random.default_rng(8)
        worst = 0.0
        eps = 1e-5
        for _ in range(5):
            u, h = _smooth_positive(box15, rng), _smooth(box15, rng)
            g = grad_J(box15, u)
            lhs = e_inner(box15, g, h)
            fd = (evaluate_J(box15, u + h * eps).J - evaluate_J(box15, u - h * eps).J) / (2 * eps)
            worst = max(worst, abs(lhs - fd) / abs(fd))
        return worst

    worst, dt = _timed(run)
    ok = worst <= 1e-4 and dt < 60
    record("8", ok, f"max relative error {worst:.2e} over 5 pairs (box N=15), {dt:.2f}s")
    assert ok


# ---------------------------------------------------------------- 9


def test_criterion_9_flow_invariants():
    def run():
        rows = []
        for name in CANNED:
            d, u0 = canned_initial(name)
            dt0 = 0.002 if name == "annulus-two-bubble" else 0.05
            st = flow_run(d, u0, FlowParams(dt0=dt0, t_max=50.0))
            J = st.column("J")
            mono = bool(np.all(np.diff(J) <= 0))
            drift = float(np.max(st.column("norm_drift")))
            pos = float(np.min(st.column("min_u") / st.column("max_u")))
            rows.append((name, st.steps, st.status, mono, drift, pos))
        return rows

    rows, dt = _timed(run)
    ok = all(m and dr <= 1e-12 and p >= -1e-6 for _, _, _, m, dr, p in rows) and dt < 300
    detail = "; ".join(f"{n}: {s} steps, {st}, monotone {m}, drift {dr:.1e}, min/max {p:.1e}"
                       for n, s, st, m, dr, p in rows)
    record("9", ok, f"{detail}; {dt:.1f}s")
    assert ok
    assert all(s >= 1 for _, s, *_ in rows)


# ---------------------------------------------------------------- 10


def test_criterion_10_self_fit(box15):
    def run():
        a = np.array([0.47, 0.52, 0.5, 0.49, 0.51])
        lam = 10.0
        u = project_configuration(box15, Configuration.common([1.0], [a], lam))
        fit = fit_representation(box15, u, 1)
        return a, lam, fit

    (a, lam, fit), dt = _timed(run)
    da = float(np.linalg.norm(fit.centers[0] - a))
    dl = abs(fit.lams[0] / lam - 1)
    ok = da <= box15.spacing and dl <= 1e-3 and dt < 60
    record("10", ok, f"|a_fit - a|/h {da / box15.spacing:.1e}, |lam_fit/lam - 1| {dl:.1e}, {dt:.2f}s")
    assert ok


# ---------------------------------------------------------------- 11


def test_criterion_11_inequality_oracles():
    def run():
        return scan_jensen(10.0, 100_000, 0), scan_gamma(10.0, 100_000, 0), scan_taylor(10.0, 1_000_000, 0)

    (j, g, t), dt = _timed(run)
    ok = (j.value >= -1e-12 and g.value > 1 and math.isfinite(t.value)
          and math.isclose(g.value, GAMMA_STAR_Q10, rel_tol=1e-12)
          and math.isclose(t.value, M_STAR_Q10, rel_tol=1e-12) and dt < 30)
    record("11", ok, f"min Jensen defect {j.value:.1e}, gamma* {g.value:.6f}, M* {t.value:.3f} "
           f"(q=10, frozen), {dt:.2f}s")
    assert ok
