"""Bubbles, their Navier projections and the universal constants.

The bubble centered at ``a`` with concentration ``lam`` is

    delta(x) = c_n * (lam / (1 + lam^2 |x - a|^2))^((n-4)/2),

with ``c_n`` chosen so that ``Δ²delta = delta^((n+4)/(n-4))`` holds exactly on
R^n.  Free-space integrals are one-dimensional radial quadratures after the
substitution ``r = tan(theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as _quad
from scipy.special import beta as _beta

from .grid import DomainError, RadialGrid, ScalarField, integrate, unit_sphere_area
from .solvers import apply_laplacian, navier_bilaplacian


def critical_exponent(n: int) -> float:
    """``2n/(n-4)``."""
    return 2.0 * n / (n - 4)


def nonlinearity_exponent(n: int) -> float:
    """``(n+4)/(n-4)``."""
    return (n + 4.0) / (n - 4)


def _check_dim(n: int):
    if n < 5:
        raise ValueError(f"dimension must be at least 5, got {n}")


@dataclass(frozen=True)
class BubbleParams:
    a: np.ndarray
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("concentration lam must be positive")
        a = np.asarray(self.a, dtype=float).copy()
        a.flags.writeable = False
        object.__setattr__(self, "a", a)


@dataclass(frozen=True)
class Configuration:
    """Weighted multi-bubble ansatz ``sum alpha_i P delta_{a_i, lam_i}``."""

    alphas: np.ndarray
    centers: np.ndarray
    lams: np.ndarray

    def __post_init__(self):
        al = np.atleast_1d(np.asarray(self.alphas, dtype=float)).copy()
        ce = np.atleast_2d(np.asarray(self.centers, dtype=float)).copy()
        la = np.broadcast_to(np.asarray(self.lams, dtype=float), al.shape).copy()
        if not (len(al) == len(ce) == len(la)):
            raise ValueError("alphas, centers and lams must have the same length")
        if np.any(al < 0) or abs(al.sum() - 1.0) > 1e-12:
            raise ValueError("weights must lie on the simplex")
        if np.any(la <= 0):
            raise ValueError("concentrations must be positive")
        if len(al) >= 2 and self.min_separation(ce) <= 0:
            raise ValueError("bubble centers must be distinct")
        for arr, name in ((al, "alphas"), (ce, "centers"), (la, "lams")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @staticmethod
    def min_separation(centers) -> float:
        c = np.asarray(centers)
        if len(c) < 2:
            return math.inf
        diff = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
        return float(diff[~np.eye(len(c), dtype=bool)].min())

    @classmethod
    def common(cls, alphas, centers, lam: float) -> "Configuration":
        return cls(alphas, centers, np.full(len(np.atleast_1d(alphas)), float(lam)))

    @property
    def p(self) -> int:
        return len(self.alphas)

    @property
    def d(self) -> float:
        """Minimal pairwise distance of the centers."""
        return self.min_separation(self.centers)

    def bubbles(self) -> list[BubbleParams]:
        return [BubbleParams(a, lam) for a, lam in zip(self.centers, self.lams)]


# ------------------------------------------------------------------ constants


def bubble_constant_cn(n: int) -> float:
    """``[n (n-4) (n^2-4)]^((n-4)/8)``: the normalization making bubbles exact solutions."""
    _check_dim(n)
    return float((n * (n - 4) * (n * n - 4)) ** ((n - 4) / 8))


def _radial_integral(n: int, integrand, lam: float = 1.0) -> float:
    """``∫_{R^n} F(|x|) dx`` via ``r = tan(theta) / lam``."""
    om = unit_sphere_area(n)

    def g(t):
        r = math.tan(t) / lam
        return om * r ** (n - 1) * integrand(r) / (lam * math.cos(t) ** 2)

    val, _ = _quad.quad(g, 0.0, math.pi / 2, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


def constant_c2(n: int) -> float:
    """``∫_{R^n} (1+|y|^2)^{-(n+4)/2} dy`` by adaptive quadrature."""
    _check_dim(n)
    return _radial_integral(n, lambda r: (1.0 + r * r) ** (-(n + 4) / 2))


def constant_c2_closed_form(n: int) -> float:
    """Beta-function value ``ω_{n-1} B(n/2, 2) / 2`` of the same integral."""
    return unit_sphere_area(n) * 0.5 * _beta(n / 2, 2.0)


def constant_S_quarter(n: int, lam: float = 1.0, formula: str = "power") -> float:
    """``S^{(n-4)/4}`` as ``∫ delta^{2n/(n-4)}`` (``formula="power"``) or ``∫ (Δdelta)^2``."""
    _check_dim(n)
    q = critical_exponent(n)
    if formula == "power":
        f = lambda r: delta_radial(r, lam, n) ** q
    elif formula == "laplacian":
        f = lambda r: delta_laplacian_radial(r, lam, n) ** 2
    else:
        raise ValueError(f"unknown formula {formula!r}")
    return _radial_integral(n, f, lam)


def constant_S(n: int, lam: float = 1.0, formula: str = "power") -> float:
    """Sobolev-type constant ``S`` with ``∫_{R^n} delta^{2n/(n-4)} = S^{(n-4)/4}``."""
    return constant_S_quarter(n, lam, formula) ** (4.0 / (n - 4))


@dataclass(frozen=True)
class Constants:
    n: int
    c_n: float
    c2: float
    S: float
    c1: float
    provenance: dict = field(default_factory=dict)

    @property
    def S_quarter(self) -> float:
        """``S^{(n-4)/4}``."""
        return self.S ** ((self.n - 4) / 4.0)

    def b(self, p: float) -> float:
        """Energy threshold ``p^{4/(n-4)} S``."""
        return p ** (4.0 / (self.n - 4)) * self.S

    def level(self, J: float) -> int:
        """Largest ``p >= 0`` with ``b_p <= J``."""
        if J < self.S:
            return 0
        p = int(math.floor((J / self.S) ** ((self.n - 4) / 4.0)))
        while self.b(p + 1) <= J:
            p += 1
        while p > 0 and self.b(p) > J:
            p -= 1
        return p

    def to_dict(self) -> dict:
        return {"n": self.n, "c_n": self.c_n, "c2": self.c2, "S": self.S, "c1": self.c1,
                "S_quarter": self.S_quarter, "provenance": dict(self.provenance)}


@lru_cache(maxsize=None)
def constants(n: int = 5) -> Constants:
    """All constants for dimension ``n`` (computed once per ``n``)."""
    cn = bubble_constant_cn(n)
    c2 = constant_c2(n)
    Sq = constant_S_quarter(n)
    S = Sq ** (4.0 / (n - 4))
    c1 = n * c2 * cn ** nonlinearity_exponent(n) / ((n - 4) * Sq)
    prov = {"c_n": "closed form, fixed by the bubble PDE",
            "c2": "adaptive radial quadrature (checked against Beta closed form)",
            "S": "adaptive radial quadrature of ∫δ^{2n/(n-4)}",
            "c1": "derived: n c2 c_n^{(n+4)/(n-4)} / ((n-4) S^{(n-4)/4})"}
    return Constants(n, cn, c2, S, c1, prov)


# ---------------------------------------------------------------- the bubble


def delta_radial(r, lam: float, n: int):
    """Bubble profile at distance ``r`` from its center."""
    return bubble_constant_cn(n) * (lam / (1.0 + lam**2 * np.asarray(r) ** 2)) ** ((n - 4) / 2)


def delta_laplacian_radial(r, lam: float, n: int):
    """Closed-form ``Δdelta``: ``-(n-4) c_n lam^{n/2} (n + 2s^2)(1+s^2)^{-n/2}``, ``s = lam r``."""
    s2 = (lam * np.asarray(r)) ** 2
    return -(n - 4) * bubble_constant_cn(n) * lam ** (n / 2) * (n + 2 * s2) * (1 + s2) ** (-n / 2)


def delta_bilaplacian_radial(r, lam: float, n: int):
    """Closed-form ``Δ²delta = c_n n(n-4)(n^2-4) lam^{(n+4)/2} (1+s^2)^{-(n+4)/2}``."""
    s2 = (lam * np.asarray(r)) ** 2
    return bubble_constant_cn(n) * n * (n - 4) * (n * n - 4) * lam ** ((n + 4) / 2) * (1 + s2) ** (-(n + 4) / 2)


def _sq(b: BubbleParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sum((x - b.a) ** 2, axis=-1)


def delta(b: BubbleParams, x, n: int):
    return delta_radial(np.sqrt(_sq(b, x)), b.lam, n)


def delta_laplacian_analytic(b: BubbleParams, x, n: int):
    return delta_laplacian_radial(np.sqrt(_sq(b, x)), b.lam, n)


def delta_bilaplacian_analytic(b: BubbleParams, x, n: int):
    return delta_bilaplacian_radial(np.sqrt(_sq(b, x)), b.lam, n)


def radial_power_laplacian(beta: float, n: int) -> float:
    """Coefficient in ``Δ r^beta = beta (beta + n - 2) r^(beta - 2)``."""
    return beta * (beta + n - 2)


def sample_delta(d, b: BubbleParams, power: float = 1.0) -> ScalarField:
    """``delta_b^power`` evaluated node by node."""
    n = d.n
    cn = bubble_constant_cn(n)
    w = b.lam / (1.0 + b.lam**2 * d.sq_dist(b.a))
    return ScalarField(d, cn**power * w ** ((n - 4) / 2 * power))


def _check_center(d, b: BubbleParams):
    if not d.contains(b.a):
        raise DomainError("bubble center must lie strictly inside the domain")


def project_bubble(d, b: BubbleParams, with_report: bool = False):
    """Navier projection ``P delta``: ``Δ² P delta = delta^{(n+4)/(n-4)}``, ``P delta = Δ P delta = 0``."""
    _check_center(d, b)
    u, rep = navier_bilaplacian(d, sample_delta(d, b, nonlinearity_exponent(d.n)))
    return (u, rep) if with_report else u


def project_configuration(d, c: Configuration, with_report: bool = False):
    """``sum alpha_i P delta_i`` via a single bilaplacian solve (the map is linear)."""
    e = nonlinearity_exponent(d.n)
    src = None
    for al, b in zip(c.alphas, c.bubbles()):
        _check_center(d, b)
        term = sample_delta(d, b, e) * al
        src = term if src is None else src + term
    u, rep = navier_bilaplacian(d, src)
    return (u, rep) if with_report else u


def phi(d, b: BubbleParams) -> ScalarField:
    """Projection defect ``delta - P delta``."""
    return sample_delta(d, b) - project_bubble(d, b)


def phi_richardson(d: RadialGrid, b: BubbleParams) -> ScalarField:
    """Defect on ``d`` extrapolated from ``d`` and its refinement: ``(4 phi_{h/2} - phi_h) / 3``."""
    coarse = phi(d, b).values
    fine = phi(d.refined(), b).values[::2]
    return ScalarField(d, (4.0 * fine - coarse) / 3.0)


def eps_ij(bi: BubbleParams, bj: BubbleParams) -> float:
    """Interaction parameter ``1 / (lam_i/lam_j + lam_j/lam_i + lam_i lam_j |a_i - a_j|^2)``."""
    li, lj = bi.lam, bj.lam
    return 1.0 / (li / lj + lj / li + li * lj * float(np.sum((bi.a - bj.a) ** 2)))


def e_norm(d, u: ScalarField) -> float:
    """``||Δ_h u||_{L^2}`` with homogeneous boundary values."""
    lap = apply_laplacian(d, u)
    return math.sqrt(integrate(lap * lap))


@dataclass(frozen=True)
class VReport:
    eps: float
    scale_ok: list
    interaction_ok: dict
    e_distance: float | None

    @property
    def satisfied(self) -> bool:
        ok = all(self.scale_ok) and all(self.interaction_ok.values())
        if self.e_distance is not None:
            ok = ok and self.e_distance < self.eps
        return ok


def check_V_p_eps(d, c: Configuration, eps: float, u: ScalarField | None = None) -> VReport:
    """Membership conditions of the neighbourhood ``V(p, eps)`` of a bubble configuration."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    bs = c.bubbles()
    scale_ok = [b.lam * d.dist_to_boundary(b.a) >= 1.0 / eps for b in bs]
    inter = {(i, j): eps_ij(bs[i], bs[j]) < eps for i in range(len(bs)) for j in range(len(bs)) if i != j}
    dist = None
    if u is not None:
        total = None
        for b in bs:
            pb = project_bubble(d, b)
            total = pb if total is None else total + pb
        dist = e_norm(d, u - total / e_norm(d, total))
    return VReport(eps, scale_ok, inter, dist)

