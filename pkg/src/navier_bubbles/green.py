"""Regular part of the Navier Green function of the bilaplacian.

``G(x, y) = c_n |x-y|^{4-n} - H(x, y)`` where ``H(x, ·)`` is biharmonic in the
domain with ``H = c_n |x-y|^{4-n}`` and ``ΔH = -2(n-4) c_n |x-y|^{2-n}`` on the
boundary.  ``H`` is smooth, so it is computed as an ordinary boundary value
problem and no Dirac source is ever discretized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bubbles import BubbleParams, bubble_constant_cn, phi, phi_richardson, radial_power_laplacian
from .grid import DomainError, RadialGrid, ScalarField
from .solvers import SolveReport, navier_bilaplacian, zeros


@dataclass(frozen=True, eq=False)
class GreenSample:
    source: np.ndarray
    H: ScalarField
    diag: float
    report: SolveReport

    def H_at(self, y) -> float:
        return self.H.value_at(y)

    def G(self, y) -> float:
        y = np.asarray(y, dtype=float)
        n = self.source.size
        return bubble_constant_cn(n) * float(np.linalg.norm(y - self.source)) ** (4 - n) - self.H_at(y)


def singular_part_data(x, n: int):
    """Boundary data ``(g1, g2)`` of ``H(x, ·)``."""
    x = np.asarray(x, dtype=float)
    cn = bubble_constant_cn(n)
    k = radial_power_laplacian(4 - n, n)  # -2(n-4)

    def g1(pts):
        return cn * np.linalg.norm(pts - x, axis=-1) ** (4 - n)

    def g2(pts):
        return k * cn * np.linalg.norm(pts - x, axis=-1) ** (2 - n)

    return g1, g2


def regular_part(d, x) -> GreenSample:
    """Compute ``H(x, ·)`` on ``d`` for an interior source ``x``."""
    x = np.asarray(x, dtype=float)
    if not d.contains(x) or d.dist_to_boundary(x) <= 0:
        raise DomainError("source point must lie strictly inside the domain")
    if isinstance(d, RadialGrid):
        d.sq_dist(x)  # only the grid center is representable
    g1, g2 = singular_part_data(x, d.n)
    H, rep = navier_bilaplacian(d, zeros(d), g1, g2)
    return GreenSample(x, H, H.value_at(x), rep)


def green_matrix(d, points) -> tuple[np.ndarray, np.ndarray]:
    """``H(a_i, a_i)`` and the symmetric-in-principle matrix ``G(a_i, a_j)`` (zero diagonal)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    samples = [regular_part(d, a) for a in pts]
    p = len(pts)
    Hdiag = np.array([s.diag for s in samples])
    G = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if i != j:
                G[i, j] = samples[i].G(pts[j])
    return Hdiag, G


def ball_regular_part_center(n: int, R: float = 1.0) -> tuple[float, float]:
    """Closed form ``H(0, y) = A + B |y|^2`` on the ball of radius ``R``."""
    cn = bubble_constant_cn(n)
    B = radial_power_laplacian(4 - n, n) * cn * R ** (2 - n) / (2 * n)
    A = cn * R ** (4 - n) - B * R**2
    return A, B


@dataclass(frozen=True)
class DefectDecayReport:
    lams: np.ndarray
    errors: np.ndarray
    slope: float
    richardson: bool

    def rows(self):
        return list(zip(self.lams.tolist(), self.errors.tolist()))


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def validate_lemma_a1(d, a, lams, richardson: bool | None = None) -> DefectDecayReport:
    """Decay of ``||lam^{(n-4)/2} phi_{a,lam} - H(a, ·)||_inf`` along a sweep of ``lam``.

    The sup norm runs over nodes with ``|y - a| >= h``.  On radial grids the
    defect is Richardson-extrapolated from the grid and its refinement unless
    ``richardson=False``.
    """
    lams = np.asarray(sorted(lams), dtype=float)
    if lams.size < 3:
        raise ValueError("need at least three concentration values")
    a = np.asarray(a, dtype=float)
    radial = isinstance(d, RadialGrid)
    if richardson is None:
        richardson = radial
    if richardson and not radial:
        raise ValueError("Richardson extrapolation is only available on radial grids")
    Hf = regular_part(d, a).H.values.ravel()
    far = np.sqrt(d.sq_dist(a)).ravel() >= d.spacing * (1 - 1e-12)
    errs = []
    for lam in lams:
        b = BubbleParams(a, lam)
        ph = phi_richardson(d, b) if richardson else phi(d, b)
        scaled = lam ** ((d.n - 4) / 2) * ph.values.ravel()
        errs.append(float(np.max(np.abs(scaled - Hf)[far])))
    errs = np.asarray(errs)
    return DefectDecayReport(lams, errs, fit_loglog_slope(lams, errs), bool(richardson))


def h_diag_along_ray(d, start, direction, steps) -> np.ndarray:
    """``H(x, x)`` for ``x = start + t * direction`` and ``t`` in ``steps``."""
    start = np.asarray(start, float)
    direction = np.asarray(direction, float)
    direction = direction / math.sqrt(direction @ direction)
    return np.array([regular_part(d, start + t * direction).diag for t in steps])
