"""Least-squares fit of a field by a sum of projected bubbles in the energy norm.

The objective ``||u - sum alpha_i P delta_i||_E^2`` only needs ``Δ_h P delta_i``,
which is one Dirichlet solve of ``delta_i^{(n+4)/(n-4)}``.  Weights are solved
linearly; centers and log-scales take Gauss-Newton steps with step halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bubbles import BubbleParams, Configuration, bubble_constant_cn, nonlinearity_exponent
from .grid import BoxGrid, DomainError, MaskedDomain, RadialGrid, ScalarField
from .solvers import apply_laplacian, solve_laplacian_stage


@dataclass
class FitResult:
    alphas: np.ndarray
    centers: np.ndarray
    lams: np.ndarray
    residual: float
    relative_residual: float
    converged: bool
    iterations: int
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def p(self) -> int:
        return len(self.alphas)

    def configuration(self) -> Configuration:
        """Fitted bubbles with weights rescaled onto the simplex."""
        al = np.clip(self.alphas, 0.0, None)
        s = al.sum()
        al = al / s if s > 0 else np.full(self.p, 1.0 / self.p)
        al[-1] = 1.0 - al[:-1].sum()
        return Configuration(al, self.centers, self.lams)

    def to_dict(self) -> dict:
        return {"p": self.p, "alphas": self.alphas.tolist(), "centers": self.centers.tolist(),
                "lams": self.lams.tolist(), "residual": self.residual,
                "relative_residual": self.relative_residual, "converged": self.converged,
                "iterations": self.iterations, "message": self.message}


# ------------------------------------------------------------ lattice helpers


def _lattice_values(d, u: ScalarField) -> np.ndarray:
    """Field on the full box lattice; nodes outside a mask read as ``-inf``."""
    if isinstance(d, BoxGrid):
        return u.values
    full = np.full(d.parent.shape, -np.inf)
    full.ravel()[d.flat_index] = u.values
    return full


def _padded(vals: np.ndarray, fill: float) -> np.ndarray:
    return np.pad(vals, 1, mode="constant", constant_values=fill)


def local_maxima(d, u: ScalarField) -> list[tuple[np.ndarray, float]]:
    """Strict-or-equal lattice local maxima ``(point, value)``, largest first."""
    if isinstance(d, RadialGrid):
        return [(d.center.copy(), float(u.values[0]))] if d.is_ball else []
    vals = _lattice_values(d, u)
    pad = _padded(vals, 0.0 if isinstance(d, BoxGrid) else -np.inf)
    core = tuple(slice(1, -1) for _ in range(vals.ndim))
    is_max = vals > 0
    for ax in range(vals.ndim):
        for s in (-1, 1):
            sl = list(core)
            sl[ax] = slice(1 + s, vals.shape[ax] + 1 + s)
            is_max &= vals >= pad[tuple(sl)]
    idx = np.argwhere(is_max)
    v = vals[tuple(idx.T)]
    order = np.argsort(-v, kind="stable")
    h = d.spacing
    return [((idx[k] + 1) * h, float(v[k])) for k in order]


def _neighbour_values(d, u: ScalarField, point) -> tuple[float, np.ndarray]:
    """Value at a lattice node and at its in-domain axis neighbours (pairs per axis)."""
    vals = _lattice_values(d, u)
    k = np.rint(np.asarray(point) / d.spacing).astype(int) - 1
    pad = _padded(vals, 0.0 if isinstance(d, BoxGrid) else -np.inf)
    kp = k + 1
    centre = float(pad[tuple(kp)])
    nb = np.empty((vals.ndim, 2))
    for ax in range(vals.ndim):
        for j, s in enumerate((-1, 1)):
            q = kp.copy()
            q[ax] += s
            nb[ax, j] = pad[tuple(q)]
    return centre, nb


def peak_scale(d, u: ScalarField, point=None) -> float:
    """Concentration estimate from the drop between a peak node and its neighbours.

    For ``delta = c (mu / (1 + mu^2 r^2))^{(n-4)/2}`` the ratio ``t = delta(h)/delta(0)``
    gives ``mu = sqrt(t^{-2/(n-4)} - 1) / h``.
    """
    n, h = d.n, d.spacing
    if isinstance(d, RadialGrid):
        j = int(np.argmax(u.values)) if point is None else 0
        if j + 1 >= d.M:
            return math.inf
        t = u.values[j + 1] / u.values[j] if u.values[j] > 0 else 0.0
        h = d.radii[j + 1] - d.radii[j]
    else:
        if point is None:
            vals = _lattice_values(d, u)
            point = (np.array(np.unravel_index(np.argmax(vals), vals.shape)) + 1) * h
        c, nb = _neighbour_values(d, u, point)
        good = np.isfinite(nb) & (nb > 0)
        t = float(np.mean(nb[good])) / c if (c > 0 and good.any()) else 0.0
    if t <= 0:
        return math.inf
    t = min(t, 1.0)
    return math.sqrt(max(t ** (-2.0 / (n - 4)) - 1.0, 0.0)) / h


def _subnode_peak(d, u: ScalarField, point) -> np.ndarray:
    """Parabolic refinement of a lattice maximum, axis by axis."""
    c, nb = _neighbour_values(d, u, point)
    x = np.array(point, dtype=float)
    for ax in range(d.n):
        lo, hi = nb[ax]
        if np.isfinite(lo) and np.isfinite(hi):
            den = lo - 2 * c + hi
            if den < 0:
                x[ax] += 0.5 * d.spacing * (lo - hi) / den
    return x


# --------------------------------------------------------------- model pieces


class _Model:
    def __init__(self, d, u: ScalarField, free_centers: bool):
        self.d = d
        self.n = d.n
        self.e = nonlinearity_exponent(d.n)
        self.ce = bubble_constant_cn(d.n) ** self.e
        self.free = free_centers
        w = d.weights()
        self.sw = np.sqrt(np.broadcast_to(w, d.shape)).ravel()
        if isinstance(d, RadialGrid):
            self.sw = self.sw.copy()
            self.sw[d.dirichlet] = 0.0
        self.U = self.sw * apply_laplacian(d, u).values.ravel()
        self.unorm = float(np.linalg.norm(self.U))
        if isinstance(d, BoxGrid):
            self.coords = d.axes()
        elif isinstance(d, MaskedDomain):
            self.coords = list(d.points.T)
        else:
            self.coords = None

    def _diffs(self, b):
        return [c - bk for c, bk in zip(self.coords, b)]

    def _w(self, b, lam):
        if self.coords is None:
            rho2 = self.d.radii**2
            return lam / (1 + lam**2 * rho2), rho2, None
        diffs = self._diffs(b)
        rho2 = sum(x * x for x in diffs)
        return lam / (1 + lam**2 * rho2), rho2, diffs

    def _solve(self, arr) -> np.ndarray:
        arr = np.broadcast_to(arr, self.d.shape)
        return self.sw * solve_laplacian_stage(self.d, ScalarField(self.d, arr)).values.ravel()

    def column(self, b, lam) -> np.ndarray:
        w, _, _ = self._w(b, lam)
        return self._solve(self.ce * w ** ((self.n + 4) / 2))

    def jacobian(self, b, lam) -> list[np.ndarray]:
        """Columns ``Δ_h^{-1} d(delta^e)`` w.r.t. the centre coordinates, then ``log lam``."""
        w, rho2, diffs = self._w(b, lam)
        base = self.ce * 0.5 * (self.n + 4) * w ** ((self.n + 2) / 2)
        den = (1 + lam**2 * rho2) ** 2
        cols = []
        if self.free:
            for x in diffs:
                cols.append(self._solve(base * 2 * lam**3 * x / den))
        cols.append(self._solve(base * lam * (1 - lam**2 * rho2) / den))
        return cols

    def weights_for(self, V: np.ndarray) -> tuple[np.ndarray, float]:
        G = V.T @ V
        rhs = V.T @ self.U
        al = np.linalg.lstsq(G, rhs, rcond=None)[0]
        r = self.U - V @ al
        return al, float(r @ r)


def _initial_guess(d, u: ScalarField, p: int, separation: float, rng) -> tuple[list, list]:
    if isinstance(d, RadialGrid):
        if p != 1:
            raise DomainError("radial grids carry a single centered bubble")
        return [d.center.copy()], [peak_scale(d, u)]
    picks: list = []
    for pt, _ in local_maxima(d, u):
        if all(np.linalg.norm(pt - q) >= separation for q in picks):
            picks.append(pt)
        if len(picks) == p:
            break
    if len(picks) < p:
        raise ValueError(f"found {len(picks)} separated maxima, need {p}")
    if rng is not None:
        picks = [picks[i] for i in rng.permutation(p)]
    mus = [peak_scale(d, u, pt) for pt in picks]
    centers = [_subnode_peak(d, u, pt) for pt in picks]
    mus = [m if np.isfinite(m) else 1.0 / d.spacing for m in mus]
    return centers, mus


def fit_representation(d, u: ScalarField, p: int = 1, *, max_iter: int = 40, tol: float = 1e-10,
                       separation: float | None = None, seed: int | None = None,
                       scan: int = 9) -> FitResult:
    """Best ``sum alpha_i P delta_{b_i, mu_i}`` approximation of ``u`` in ``||Δ_h ·||_{L^2}``.

    Initial centers are the ``p`` largest lattice maxima at least ``separation``
    apart (default ``3h``), refined below the mesh by a parabola; scales come
    from the peak drop, followed by a ``scan``-point search over a factor of
    two.  A ``seed`` shuffles the initial ordering.  On radial grids the
    center is held at the grid center.  Never raises on non-convergence: the
    best iterate is returned with ``converged=False``.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    free = not isinstance(d, RadialGrid)
    model = _Model(d, u, free)
    if model.unorm == 0:
        raise ValueError("cannot fit a field with zero energy")
    rng = np.random.default_rng(seed) if seed is not None else None
    sep = 3 * d.spacing if separation is None else separation
    centers, mus = _initial_guess(d, u, p, sep, rng)
    centers = [np.asarray(c, dtype=float) for c in centers]
    logmu = np.log(np.asarray(mus, dtype=float))

    def evaluate(cs, lm):
        V = np.stack([model.column(c, math.exp(s)) for c, s in zip(cs, lm)], axis=1)
        al, obj = model.weights_for(V)
        return al, obj

    al, obj = evaluate(centers, logmu)
    if scan > 1:
        for i in range(p):
            best = (obj, logmu[i], al)
            for f in np.linspace(-math.log(2), math.log(2), scan):
                trial = logmu.copy()
                trial[i] = logmu[i] + f
                a2, o2 = evaluate(centers, trial)
                if o2 < best[0]:
                    best = (o2, trial[i], a2)
            obj, logmu[i], al = best
    history = [obj]
    converged, message, it = False, "iteration cap reached", 0
    floor = (1e-10 * model.unorm) ** 2
    for it in range(1, max_iter + 1):
        if obj <= floor:
            converged, message = True, "exact fit"
            break
        V = np.stack([model.column(c, math.exp(s)) for c, s in zip(centers, logmu)], axis=1)
        r = model.U - V @ al
        cols = []
        for i, (c, s) in enumerate(zip(centers, logmu)):
            cols.extend(al[i] * col for col in model.jacobian(c, math.exp(s)))
        J = np.stack(cols, axis=1)
        JtJ = J.T @ J
        step = np.linalg.lstsq(JtJ + 1e-14 * np.trace(JtJ) / len(JtJ) * np.eye(len(JtJ)), J.T @ r,
                               rcond=None)[0]
        k = d.n + 1 if free else 1
        t, accepted = 1.0, False
        for _ in range(30):
            cs, lm = [], logmu.copy()
            for i in range(p):
                blk = t * step[i * k:(i + 1) * k]
                cs.append(centers[i] + blk[:-1] if free else centers[i])
                lm[i] += blk[-1]
            if all(d.contains(c) for c in cs):
                a2, o2 = evaluate(cs, lm)
                if o2 < obj:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            message = "no descent along the Gauss-Newton direction"
            converged = obj <= (1e-6 * model.unorm) ** 2
            break
        rel_drop = (obj - o2) / obj
        centers, logmu, al, obj = cs, lm, a2, o2
        history.append(obj)
        small = np.max(np.abs(t * step)) < 1e-12 * max(1.0, np.max(np.abs(logmu)))
        if rel_drop < tol or small:
            converged, message = True, "stationary"
            break
    res = math.sqrt(max(obj, 0.0))
    return FitResult(np.asarray(al), np.array(centers), np.exp(logmu), res, res / model.unorm,
                     converged, it, message, history)


def bubble_from_fit(fit: FitResult, i: int = 0) -> BubbleParams:
    return BubbleParams(fit.centers[i], float(fit.lams[i]))
