"""Dirichlet Poisson solves and the Navier bilaplacian.

Sign convention: every solver takes ``Δu = f``.  The discrete operator is the
``(2n+1)``-point stencil on box and masked domains and the conservative
finite-volume form of ``u'' + (n-1)/r u'`` on radial grids.  The box path
inverts its stencil exactly with an n-dimensional type-I sine transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse

from .grid import BoundaryData, BoxGrid, DomainError, MaskedDomain, RadialGrid, ScalarField

CG_TOL = 1e-10


class SolverError(RuntimeError):
    """A linear solve failed; carries the last relative residual."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_norm: float
    backend: str

    def merge(self, other: "SolveReport") -> "SolveReport":
        return SolveReport(self.iterations + other.iterations,
                           max(self.residual_norm, other.residual_norm), self.backend)


def _cached(domain, key, build):
    store = domain.__dict__.setdefault("_solver_cache", {})
    if key not in store:
        store[key] = build()
    return store[key]


def _eval_boundary(g: BoundaryData, pts: np.ndarray) -> np.ndarray:
    if g is None:
        return np.zeros(len(pts))
    if callable(g):
        return np.asarray(g(pts), dtype=float).reshape(len(pts))
    return np.full(len(pts), float(g))


def _is_zero(g: BoundaryData) -> bool:
    return g is None or (not callable(g) and float(g) == 0.0)


# ---------------------------------------------------------------- box backend


@lru_cache(maxsize=8)
def _box_eigenvalues(n: int, N: int, h: float) -> np.ndarray:
    k = np.arange(1, N + 1)
    ev = -(2.0 / h**2) * (1.0 - np.cos(k * np.pi / (N + 1)))
    total = np.zeros((N,) * n)
    for ax in range(n):
        shape = [1] * n
        shape[ax] = N
        total = total + ev.reshape(shape)
    total.flags.writeable = False
    return total


def _box_stencil(d: BoxGrid, u: np.ndarray) -> np.ndarray:
    out = (-2.0 * d.n) * u
    for ax in range(d.n):
        lo = [slice(None)] * d.n
        hi = [slice(None)] * d.n
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        out[tuple(hi)] += u[tuple(lo)]
        out[tuple(lo)] += u[tuple(hi)]
    out /= d.spacing**2
    return out


def _box_lift(d: BoxGrid, g: BoundaryData) -> np.ndarray | float:
    """Contribution of boundary values to the stencil at face-adjacent nodes."""
    if _is_zero(g):
        return 0.0
    N, n, h = d.nodes_per_axis, d.n, d.spacing
    lift = np.zeros(d.shape)
    face_grid = np.stack(np.meshgrid(*([d.axis] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    for ax in range(n):
        for pos, idx in ((0.0, 0), (d.side, N - 1)):
            pts = np.insert(face_grid, ax, pos, axis=1)
            vals = _eval_boundary(g, pts).reshape((N,) * (n - 1))
            sl = [slice(None)] * n
            sl[ax] = idx
            lift[tuple(sl)] += vals / h**2
    return lift


def _box_solve(d: BoxGrid, rhs: np.ndarray) -> np.ndarray:
    ev = _box_eigenvalues(d.n, d.nodes_per_axis, d.spacing)
    spec = scipy.fft.dstn(rhs, type=1, norm="ortho")
    spec /= ev
    return scipy.fft.idstn(spec, type=1, norm="ortho")


# ------------------------------------------------------------- masked backend


def _masked_matrix(d: MaskedDomain) -> scipy.sparse.csr_matrix:
    def build():
        rows, cols, _, _ = d.neighbours
        m, h2 = d.node_count, d.spacing**2
        off = scipy.sparse.csr_matrix((np.full(rows.size, 1.0 / h2), (rows, cols)), shape=(m, m))
        return (off + scipy.sparse.diags(np.full(m, -2.0 * d.n / h2))).tocsr()

    return _cached(d, "laplacian", build)


def _masked_lift(d: MaskedDomain, g: BoundaryData) -> np.ndarray | float:
    if _is_zero(g):
        return 0.0
    _, _, grows, _ = d.neighbours
    vals = _eval_boundary(g, d.ghost_projection)
    return np.bincount(grows, weights=vals / d.spacing**2, minlength=d.node_count)


def conjugate_gradient(matvec, b: np.ndarray, tol: float = CG_TOL, maxiter: int = 1000,
                       x0: np.ndarray | None = None) -> tuple[np.ndarray, int, float]:
    """Plain CG for a symmetric positive definite operator.

    Stops when ``||b - A x||_2 <= tol * ||b||_2``.  Raises :class:`SolverError`
    with the last relative residual if ``maxiter`` is reached.
    """
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - matvec(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = float(r @ r)
    for it in range(1, maxiter + 1):
        Ap = matvec(p)
        alpha = rr / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        rel = np.sqrt(rr_new) / bnorm
        if rel <= tol:
            return x, it, rel
        p *= rr_new / rr
        p += r
        rr = rr_new
    raise SolverError(f"CG did not converge in {maxiter} iterations", rel, maxiter)


# ------------------------------------------------------------- radial backend


def _radial_coeffs(d: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Face conductances ``f_{j+1/2}^{n-1} / (r_{j+1} - r_j)`` and cell volumes."""
    def build():
        C = d.faces[1:-1] ** (d.n - 1) / np.diff(d.radii)
        return C, d.cell_volumes

    return _cached(d, "coeffs", build)


def _radial_stencil(d: RadialGrid, u: np.ndarray) -> np.ndarray:
    C, V = _radial_coeffs(d)
    flux = C * np.diff(u)
    out = np.zeros_like(u)
    out[:-1] += flux
    out[1:] -= flux
    out /= V
    out[d.dirichlet] = 0.0
    return out


def _radial_solve(d: RadialGrid, f: np.ndarray, bvals: np.ndarray) -> np.ndarray:
    C, V = _radial_coeffs(d)
    u = np.zeros(d.M)
    u[d.dirichlet] = bvals
    lo = 0 if d.is_ball else 1
    hi = d.M - 1
    # unknowns lo..hi-1; row j: C_{j-1/2} u_{j-1} - (C_{j-1/2}+C_{j+1/2}) u_j + C_{j+1/2} u_{j+1} = V_j f_j
    Cp = C[lo:hi]
    Cm = np.concatenate([[0.0], C[: hi - 1]])[lo:hi]
    rhs = V[lo:hi] * f[lo:hi]
    rhs[-1] -= C[hi - 1] * u[hi]
    if not d.is_ball:
        rhs[0] -= C[0] * u[0]
    ab = np.zeros((3, hi - lo))
    ab[0, 1:] = Cp[:-1]
    ab[1] = -(Cm + Cp)
    ab[2, :-1] = Cp[:-1]
    u[lo:hi] = scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
    return u


# ------------------------------------------------------------------ public API


def _check(d, f: ScalarField):
    if f.domain is not d:
        raise DomainError("field does not belong to the given domain")


def apply_laplacian(d, u: ScalarField, g: BoundaryData = None) -> ScalarField:
    """Discrete Laplacian with boundary values ``g`` (zero if omitted).

    On radial grids the Dirichlet nodes of the result are set to zero; the
    operator is only defined in the interior.
    """
    _check(d, u)
    if isinstance(d, BoxGrid):
        return ScalarField(d, _box_stencil(d, u.values) + _box_lift(d, g))
    if isinstance(d, MaskedDomain):
        return ScalarField(d, _masked_matrix(d) @ u.values + _masked_lift(d, g))
    vals = u.values.copy()
    vals[d.dirichlet] = _eval_boundary(g, d.boundary_points())
    return ScalarField(d, _radial_stencil(d, vals))


def _residual(d, u: ScalarField, f: ScalarField, g: BoundaryData) -> float:
    res = apply_laplacian(d, u, g).values - f.values
    if isinstance(d, RadialGrid):
        res = res[d.interior]
        fmax = float(np.max(np.abs(f.values[d.interior])))
    else:
        fmax = float(np.max(np.abs(f.values)))
    return float(np.max(np.abs(res))) / max(1.0, fmax)


def poisson_dirichlet(d, f: ScalarField, g: BoundaryData = None) -> tuple[ScalarField, SolveReport]:
    """Solve ``Δ_h u = f`` with ``u = g`` on the boundary."""
    _check(d, f)
    if isinstance(d, BoxGrid):
        u = ScalarField(d, _box_solve(d, f.values - _box_lift(d, g)))
        iters, backend = 0, "sine-spectral"
    elif isinstance(d, MaskedDomain):
        A = _masked_matrix(d)
        b = -(f.values - _masked_lift(d, g))
        cap = 50 * d.parent.nodes_per_axis * d.n
        x, iters, _ = conjugate_gradient(lambda v: -(A @ v), b, CG_TOL, cap)
        u, backend = ScalarField(d, x), "cg-masked"
    elif isinstance(d, RadialGrid):
        u = ScalarField(d, _radial_solve(d, f.values, _eval_boundary(g, d.boundary_points())))
        iters, backend = 0, "radial-tridiagonal"
    else:
        raise DomainError(f"unsupported domain {type(d).__name__}")
    return u, SolveReport(iters, _residual(d, u, f, g), backend)


def navier_bilaplacian(d, f: ScalarField, g1: BoundaryData = None,
                       g2: BoundaryData = None) -> tuple[ScalarField, SolveReport]:
    """Solve ``Δ²u = f`` with ``u = g1`` and ``Δu = g2`` on the boundary.

    Two cascaded Dirichlet solves: ``Δv = f, v = g2`` then ``Δu = v, u = g1``.
    """
    v, rep1 = poisson_dirichlet(d, f, g2)
    u, rep2 = poisson_dirichlet(d, v, g1)
    return u, rep1.merge(rep2)


def solve_laplacian_stage(d, f: ScalarField) -> ScalarField:
    """First Navier stage ``Δ_h^{-1} f`` with zero data; equals ``Δ_h`` of the bilaplacian solve."""
    return poisson_dirichlet(d, f)[0]


def zeros(d) -> ScalarField:
    return ScalarField(d, np.zeros(d.shape))
