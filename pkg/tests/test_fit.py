import numpy as np
import pytest

from navier_bubbles.bubbles import BubbleParams, Configuration, project_bubble, project_configuration, sample_delta
from navier_bubbles.fitting import bubble_from_fit, fit_representation, local_maxima, peak_scale
from navier_bubbles.grid import DomainError, ScalarField, make_domain


def test_radial_self_fit_recovers_scale_and_weight(ball):
    u = project_bubble(ball, BubbleParams(ball.center, 37.0)) * 2.5
    fit = fit_representation(ball, u)
    assert fit.converged
    assert abs(fit.lams[0] / 37.0 - 1) < 1e-8
    assert abs(fit.alphas[0] / 2.5 - 1) < 1e-8
    assert fit.relative_residual < 1e-8
    b = bubble_from_fit(fit)
    assert np.allclose(b.a, ball.center)


def test_radial_grid_refuses_two_bubbles(ball):
    u = project_bubble(ball, BubbleParams(ball.center, 10.0))
    with pytest.raises(DomainError):
        fit_representation(ball, u, 2)


@pytest.fixture(scope="module")
def pair_field():
    d = make_domain("box", 5, side=1.0, N=11)
    h = d.spacing
    a1 = d.center + np.array([3.3, 0.4, 0, 0, 0]) * h
    a2 = d.center - np.array([3.1, 0, 0.3, 0, 0]) * h
    c = Configuration([0.4, 0.6], [a1, a2], [8.0, 10.0])
    return d, c, project_configuration(d, c)


def _matched(fit, c):
    order = np.argsort(fit.lams)
    return fit.centers[order], fit.lams[order], fit.alphas[order]


def test_two_bubble_fit_within_two_mesh_widths(pair_field):
    d, c, u = pair_field
    fit = fit_representation(d, u, 2)
    cs, lams, als = _matched(fit, c)
    assert fit.converged and fit.relative_residual < 1e-6
    assert np.all(np.linalg.norm(cs - c.centers, axis=1) <= 2 * d.spacing)
    np.testing.assert_allclose(lams, c.lams, rtol=1e-4)
    np.testing.assert_allclose(als, c.alphas, rtol=1e-4)
    shuffled = fit_representation(d, u, 2, seed=1)
    np.testing.assert_allclose(_matched(shuffled, c)[0], cs, atol=1e-6)


def test_iteration_cap_is_reported(pair_field):
    d, _, u = pair_field
    fit = fit_representation(d, u, 2, max_iter=1)
    assert not fit.converged and fit.iterations == 1
    assert "cap" in fit.message
    assert set(fit.to_dict()) >= {"alphas", "centers", "lams", "relative_residual", "converged"}


def test_peak_scale_on_exact_bubble(box15):
    for lam in (2.0, 5.0, 9.0):
        u = sample_delta(box15, BubbleParams(box15.center, lam))
        assert abs(peak_scale(box15, u) / lam - 1) < 1e-10


def test_local_maxima_finds_both_peaks(box15):
    h = box15.spacing
    e0 = np.eye(5)[0] * 4 * h
    u = (sample_delta(box15, BubbleParams(box15.center + e0, 6.0))
         + sample_delta(box15, BubbleParams(box15.center - e0, 6.0)) * 0.5)
    peaks = local_maxima(box15, u)
    assert len(peaks) >= 2
    assert np.allclose(peaks[0][0], box15.center + e0)
    # the larger neighbour tilts the smaller peak by at most one node
    assert np.linalg.norm(peaks[1][0] - (box15.center - e0)) <= h * (1 + 1e-12)
    assert peaks[0][1] > peaks[1][1]


def test_fit_rejects_degenerate_input(box15):
    with pytest.raises(ValueError):
        fit_representation(box15, ScalarField(box15, np.zeros(box15.shape)))
    with pytest.raises(ValueError):
        fit_representation(box15, sample_delta(box15, BubbleParams(box15.center, 4.0)), 0)
