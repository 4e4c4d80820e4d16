import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from navier_bubbles.inequalities import (
    convexity_check,
    cross_sum,
    gamma_max,
    scan_gamma,
    scan_jensen,
    scan_taylor,
    signed_power,
    superadditivity_gap,
    taylor_remainder_ratio,
)

pos = st.floats(1e-3, 1e3)


def test_worked_examples():
    assert math.isclose(gamma_max([1.0, 1.0], 10.0)[0], (2**10 - 2) / 10)
    assert cross_sum([1.0, 2.0], 3.0) == 1 * 2 + 4 * 1
    assert superadditivity_gap([1.0, 1.0], 10.0, (2**10 - 2) / 10) == pytest.approx(0, abs=1e-10)
    assert convexity_check([0.5, 0.5], [0.3, 0.3], 10.0) == pytest.approx(0, abs=1e-18)
    assert taylor_remainder_ratio(1.0, 0.0, 5.0) == 0.0
    assert signed_power(-2.0, 3.0) == -8.0


@settings(max_examples=60, deadline=None)
@given(st.lists(pos, min_size=2, max_size=5), st.floats(1e-2, 1e2), st.floats(2.1, 12))
def test_gamma_is_scale_free_and_order_free(a, t, q):
    g = gamma_max(a, q)[0]
    assert math.isclose(gamma_max(np.asarray(a) * t, q)[0], g, rel_tol=1e-9)
    assert math.isclose(gamma_max(a[::-1], q)[0], g, rel_tol=1e-12)
    assert superadditivity_gap(a, q, 0.999 * min(g, 2.0)) >= -1e-9 * np.sum(a) ** q


@settings(max_examples=60, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(1e-2, 1e2), st.floats(2.1, 12))
def test_taylor_ratio_symmetries(a, b, t, q):
    r = taylor_remainder_ratio(a, b, q)
    assert math.isclose(taylor_remainder_ratio(-a, -b, q), r, rel_tol=1e-12, abs_tol=1e-300)
    if abs(b) > 1e-3 * abs(a):
        assert math.isclose(taylor_remainder_ratio(a * t, b * t, q), r, rel_tol=1e-6)


@pytest.mark.parametrize("call", [
    lambda: gamma_max([1.0, 2.0], 2.0),
    lambda: gamma_max([1.0, -2.0], 5.0),
    lambda: superadditivity_gap([0.0, 1.0], 5.0, 1.0),
    lambda: taylor_remainder_ratio(1.0, 1.0, 1.5),
    lambda: convexity_check([0.7, 0.7], [1.0, 2.0], 3.0),
    lambda: convexity_check([0.5, 0.5], [0.0, 2.0], 3.0),
    lambda: convexity_check([0.5, 0.5], [1.0, 2.0], 1.0),
])
def test_invalid_arguments(call):
    with pytest.raises(ValueError):
        call()


def test_scans_are_deterministic():
    a, b = scan_gamma(5.0, 20_000, 7), scan_gamma(5.0, 20_000, 7)
    assert a == b
    assert scan_taylor(5.0, 50_000, 3).to_dict() == scan_taylor(5.0, 50_000, 3).to_dict()
    assert scan_gamma(5.0, 20_000, 8).value != a.value


def test_frozen_gamma_values():
    assert math.isclose(scan_gamma(5.0, 100_000, 0).value, 2.000004353223762, rel_tol=1e-12)
    assert math.isclose(scan_gamma(2.5, 100_000, 0).value, 1.462741732946282, rel_tol=1e-12)


def test_jensen_defect_nonnegative():
    rep = scan_jensen(10.0, 50_000, 1)
    assert rep.value >= -1e-12
    assert set(rep.to_dict()) == {"q", "samples", "seed", "min_defect", "worst_case"}


def test_taylor_supremum_independent_check():
    # the ratio is 0-homogeneous, so its supremum lives on the unit circle
    q = 10.0
    rep = scan_taylor(q, 1_000_000, 0)
    th = np.linspace(-np.pi, np.pi, 2_000_001)
    a, b = np.cos(th), np.sin(th)
    # near b = 0 the numerator is pure cancellation; the exact limit there is q(q-1)/2
    keep = np.abs(b) > 1e-3 * np.abs(a)
    r = taylor_remainder_ratio(a[keep], b[keep], q)
    k = int(np.argmax(r))
    t0 = th[keep][k]
    res = minimize_scalar(lambda t: -taylor_remainder_ratio(math.cos(t), math.sin(t), q),
                          bounds=(t0 - 1e-5, t0 + 1e-5), method="bounded", options={"xatol": 1e-12})
    top = max(r[k], -res.fun)
    assert top <= rep.value * 1.02
    assert rep.value <= top * (1 + 1e-9)
    small_b = taylor_remainder_ratio(1.0, 1e-4, q)
    assert math.isclose(small_b, q * (q - 1) / 2, rel_tol=1e-2)
