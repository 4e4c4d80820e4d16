"""The quotient functional, its gradient, and the multi-bubble expansion.

``J(u) = (∫ (Δu)^2)^{n/(n-4)} / ∫ (u+)^{2n/(n-4)}`` is evaluated with the same
discrete Laplacian that the solvers invert, so ``∫(Δ_h Pδ)^2 = ∫ δ^{(n+4)/(n-4)} Pδ``
holds to rounding on the direct backends.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bubbles import (
    Configuration,
    Constants,
    constants,
    critical_exponent,
    nonlinearity_exponent,
    project_configuration,
)
from .green import fit_loglog_slope, green_matrix
from .grid import RadialGrid, ScalarField, integrate
from .solvers import apply_laplacian, navier_bilaplacian


class ResolutionError(ValueError):
    """A bubble is too sharp for the grid it is sampled on."""


@dataclass(frozen=True)
class EnergyBreakdown:
    A: float
    D: float
    J: float
    level: int


def evaluate_J(d, u: ScalarField, consts: Constants | None = None) -> EnergyBreakdown:
    """Numerator ``∫(Δ_h u)^2``, denominator ``∫ u_+^{2n/(n-4)}`` and ``J``."""
    consts = consts or constants(d.n)
    lap = apply_laplacian(d, u)
    A = integrate(lap * lap)
    D = integrate(u.map(lambda v: np.maximum(v, 0.0) ** critical_exponent(d.n)))
    if D <= 0:
        raise ValueError("u has no positive part; J is undefined")
    J = A ** (d.n / (d.n - 4)) / D
    return EnergyBreakdown(A, D, J, consts.level(J))


def e_inner(d, u: ScalarField, w: ScalarField) -> float:
    """``<u, w>_E = ∫ Δ_h u Δ_h w`` with homogeneous boundary values."""
    return integrate(apply_laplacian(d, u) * apply_laplacian(d, w))


def grad_J(d, u: ScalarField) -> ScalarField:
    """Riesz representative of ``dJ(u)`` in ``<·,·>_E`` (one bilaplacian solve)."""
    n = d.n
    q = critical_exponent(n)
    e = evaluate_J(d, u)
    K, _ = navier_bilaplacian(d, u.map(lambda v: np.maximum(v, 0.0) ** nonlinearity_exponent(n)))
    return u * (q * e.A ** (4 / (n - 4)) / e.D) - K * (q * e.A ** (n / (n - 4)) / e.D**2)


# ------------------------------------------------------------------ expansion


def alpha_norms(alphas, n: int) -> tuple[float, float]:
    """``|alpha|`` (Euclidean) and ``||alpha||`` (the ``2n/(n-4)`` norm)."""
    al = np.asarray(alphas, dtype=float)
    q = critical_exponent(n)
    return float(np.sqrt(np.sum(al**2))), float(np.sum(al**q) ** (1 / q))


def psi_limit(alphas, consts: Constants) -> float:
    """``lam -> inf`` limit ``S (|alpha| / ||alpha||)^{2n/(n-4)}``."""
    n = consts.n
    e2, eq = alpha_norms(alphas, n)
    return consts.S * (e2 / eq) ** critical_exponent(n)


def psi_bracket(alphas, Hdiag, Gmat, n: int) -> float:
    """Square bracket of the expansion: H terms plus off-diagonal G terms."""
    al = np.asarray(alphas, dtype=float)
    Hdiag = np.asarray(Hdiag, dtype=float)
    Gmat = np.asarray(Gmat, dtype=float)
    if not (al.shape == Hdiag.shape and Gmat.shape == (al.size, al.size)):
        raise ValueError("alphas, H(a_i, a_i) and G(a_i, a_j) sizes do not match")
    q = critical_exponent(n)
    e2, eq = alpha_norms(al, n)
    e2sq, eqq = e2**2, eq**q
    val = float(np.sum(Hdiag * (al**2 / e2sq - 2 * al**q / eqq)))
    off = ~np.eye(al.size, dtype=bool)
    coef = 2 * np.outer(al ** nonlinearity_exponent(n), al) / eqq - np.outer(al, al) / e2sq
    return val + float(np.sum((coef * Gmat)[off]))


def psi(c: Configuration, Hdiag, Gmat, consts: Constants, lam: float) -> float:
    """Expansion ``Psi(alpha, a, lam)`` for a common concentration ``lam``."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    n = consts.n
    return psi_limit(c.alphas, consts) * (1 - consts.c1 / lam ** (n - 4) * psi_bracket(c.alphas, Hdiag, Gmat, n))


def check_resolution(d, lam: float, n: int, ratio: float = 1.5):
    """Refuse bubbles whose peak drops by more than ``ratio`` over one mesh width."""
    drop = (1 + (lam * d.spacing) ** 2) ** ((n - 4) / 2)
    if drop > ratio:
        raise ResolutionError(
            f"bubble with lam={lam:g} is under-resolved: peak/neighbour ratio {drop:.3f} > {ratio} "
            f"at h={d.spacing:.3g}")


@dataclass
class ExpansionReport:
    n: int
    lams: np.ndarray
    J_num: np.ndarray
    psi: np.ndarray
    psi_limit: float
    Hdiag: np.ndarray
    Gmat: np.ndarray
    d: float
    d_prime: float
    fitted_order: float
    fitted_coefficient: float
    predicted_coefficient: float
    richardson: bool
    fit_slice: slice = field(default_factory=lambda: slice(1, None))

    @property
    def residual(self) -> np.ndarray:
        return np.abs(self.J_num - self.psi)

    @property
    def theory_order(self) -> float:
        return -(self.n - 2.0)

    def rows(self):
        return [(float(l), float(j), float(p), float(r))
                for l, j, p, r in zip(self.lams, self.J_num, self.psi, self.residual)]

    def summary(self) -> dict:
        return {"fitted_order": self.fitted_order, "fitted_coefficient": self.fitted_coefficient,
                "predicted_coefficient": self.predicted_coefficient,
                "coefficient_rel_error": abs(self.fitted_coefficient / self.predicted_coefficient - 1),
                "theory_order": self.theory_order, "psi_limit": self.psi_limit,
                "H_diag": self.Hdiag.tolist(), "G": self.Gmat.tolist(), "d": self.d,
                "d_prime": self.d_prime, "richardson": self.richardson}


def _J_config(d, c: Configuration, consts: Constants, richardson: bool) -> float:
    J = evaluate_J(d, project_configuration(d, c), consts).J
    if richardson:
        fine = d.refined()
        Jf = evaluate_J(fine, project_configuration(fine, c), consts).J
        J = (4 * Jf - J) / 3
    return J


def verify_expansion(d, c: Configuration, lams, consts: Constants | None = None,
                     richardson: bool | None = None, drop_first: bool = True) -> ExpansionReport:
    """Compare ``J(sum alpha_i P delta_{a_i, lam})`` with ``Psi`` along a sweep of ``lam``.

    Returns the residuals, the log-log order of ``|J - Psi|`` and the fitted
    coefficient of ``lam^{-(n-4)}`` in ``J - Psi_inf``.  The coefficient is the
    intercept of a linear fit of ``(J - Psi_inf) lam^{n-4}`` against
    ``lam^{-min(n-4, 2)}``, the next correction.  The smallest ``lam`` is
    dropped from both fits when ``drop_first`` is set.

    Only the weights and centers of ``c`` are used.
    """
    consts = consts or constants(d.n)
    n = d.n
    lams = np.asarray(sorted(lams), dtype=float)
    radial = isinstance(d, RadialGrid)
    if radial and c.p != 1:
        raise ValueError("radial grids only carry a single centered bubble")
    if richardson is None:
        richardson = radial
    if richardson and not radial:
        raise ValueError("Richardson extrapolation is only available on radial grids")
    for lam in lams:
        check_resolution(d, lam, n)
    Hdiag, Gmat = green_matrix(d, c.centers)
    J_num, ps = [], []
    for lam in lams:
        cl = Configuration.common(c.alphas, c.centers, lam)
        J_num.append(_J_config(d, cl, consts, richardson))
        ps.append(psi(cl, Hdiag, Gmat, consts, lam))
    J_num, ps = np.asarray(J_num), np.asarray(ps)
    P_inf = psi_limit(c.alphas, consts)
    fs = slice(1 if drop_first and lams.size > 2 else 0, None)
    lf = lams[fs]
    y = (J_num[fs] - P_inf) * lf ** (n - 4)
    X = np.vstack([np.ones_like(lf), lf ** -min(n - 4.0, 2.0)]).T
    coef = float(np.linalg.lstsq(X, y, rcond=None)[0][0])
    order = fit_loglog_slope(lf, np.abs(J_num[fs] - ps[fs]))
    pred = -P_inf * consts.c1 * psi_bracket(c.alphas, Hdiag, Gmat, n)
    l = min(d.dist_to_boundary(a) for a in c.centers)
    dd = c.d
    return ExpansionReport(n, lams, J_num, ps, P_inf, Hdiag, Gmat, dd, min(dd / 2, l), order,
                           coef, pred, bool(richardson), fs)


# --------------------------------------------------------- upper bounds


@dataclass(frozen=True)
class BoundsReport:
    J: float
    eps: float
    large_lambda_bound: float
    large_lambda_ok: bool
    eps1: float
    small_weight_applicable: bool
    small_weight_bound: float
    small_weight_ok: bool | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_upper_bounds(d, c: Configuration, lam: float, eps: float, eps1: float = 0.01,
                       consts: Constants | None = None, margin: float = 0.0) -> BoundsReport:
    """Test ``J <= (p+eps)^{4/(n-4)} S`` and, for a weight ``<= eps1``, ``J <= p^{4/(n-4)} S``."""
    consts = consts or constants(d.n)
    for a in c.centers:
        if d.dist_to_boundary(a) < margin:
            raise ValueError("bubble center violates the interior margin")
    check_resolution(d, lam, d.n)
    cl = Configuration.common(c.alphas, c.centers, lam)
    J = evaluate_J(d, project_configuration(d, cl), consts).J
    p = c.p
    b31 = consts.b(p + eps)
    applicable = bool(np.min(c.alphas) <= eps1)
    b32 = consts.b(p)
    return BoundsReport(J, eps, b31, bool(J <= b31), eps1, applicable, b32,
                        bool(J <= b32) if applicable else None)


def interaction_prediction(c: Configuration, Hdiag, Gmat, consts: Constants, lam: float) -> float:
    """``Psi - Psi_inf``: the deviation predicted by the expansion."""
    return psi(c, Hdiag, Gmat, consts, lam) - psi_limit(c.alphas, consts)
