"""Projected descent of ``J`` on the unit sphere of ``||Δ_h ·||_{L^2}``.

Steps follow the flow of ``log J``: ``u <- (u - dt grad_J(u) / J(u)) / ||·||_E``.
On the sphere this reads ``u <- (1 - q dt) u + q dt K[u_+^{(n+4)/(n-4)}] / D``, so
``dt <= 1/q`` keeps a nonnegative state nonnegative whenever ``K`` is monotone.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bubbles import BubbleParams, Configuration, critical_exponent, e_norm, project_bubble, project_configuration
from .energy import evaluate_J, grad_J
from .fitting import FitResult, fit_representation, peak_scale
from .grid import BoxGrid, MaskedDomain, RadialGrid, ScalarField, make_domain
from .solvers import navier_bilaplacian


class FlowError(RuntimeError):
    """The flow could not continue; ``state`` holds the trajectory so far."""

    def __init__(self, message: str, state: "FlowState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class FlowParams:
    dt0: float = 0.05
    t_max: float = 10.0
    tol: float = 1e-6
    max_steps: int = 5000
    min_dt: float = 1e-10
    clamp: bool = False
    blowup: float = 1.0  # stop once lambda_fit * h exceeds this
    fit_every: int = 0
    fit_p: int = 1

    def __post_init__(self):
        if not (self.dt0 > 0 and self.t_max > 0 and self.tol >= 0):
            raise ValueError("dt0, t_max must be positive and tol nonnegative")


@dataclass
class FlowState:
    domain: object
    u: ScalarField
    t: float = 0.0
    history: list = field(default_factory=list)
    status: str = "running"
    steps: int = 0
    rejected: int = 0

    @property
    def J(self) -> float:
        return self.history[-1]["J"] if self.history else math.nan

    def column(self, key: str) -> np.ndarray:
        return np.array([h.get(key, math.nan) for h in self.history], dtype=float)


def normalize(d, u: ScalarField) -> ScalarField:
    nrm = e_norm(d, u)
    if nrm == 0:
        raise ValueError("cannot normalize a field with zero energy")
    return u / nrm


def _peak_point(d, u: ScalarField) -> np.ndarray:
    if isinstance(d, RadialGrid):
        return d.center.copy()
    if isinstance(d, BoxGrid):
        idx = np.unravel_index(int(np.argmax(u.values)), d.shape)
        return (np.array(idx) + 1.0) * d.spacing
    return d.points[int(np.argmax(u.values))]


def _record(d, u: ScalarField, t: float, dt: float, J: float, gnorm: float) -> dict:
    # lambda_fit starts as the peak-drop estimate; a full fit overrides it when requested
    lam = peak_scale(d, u)
    peak = _peak_point(d, u)
    return {"t": t, "J": J, "min_u": u.min(), "max_u": u.max(), "dt": dt, "grad_norm": gnorm,
            "norm_drift": abs(e_norm(d, u) - 1.0), "lambda_fit": lam,
            "dist_fit": d.dist_to_boundary(peak)}


def _tangent_norm(d, u: ScalarField, g: ScalarField) -> float:
    from .energy import e_inner

    gt = g - u * e_inner(d, g, u)
    return e_norm(d, gt)


def flow_run(d, u0: ScalarField, params: FlowParams = FlowParams()) -> FlowState:
    """Run the projected descent until ``t_max``, near-criticality or blow-up.

    Each accepted step satisfies ``J(u_{k+1}) <= J(u_k)``; rejected steps halve
    ``dt``, accepted ones double it back up to ``dt0``.  ``status`` ends as
    ``"t_max"``, ``"near-critical"``, ``"escaped-to-infinity"`` or ``"max_steps"``.
    """
    u = normalize(d, u0)
    J = evaluate_J(d, u).J
    state = FlowState(d, u)
    dt = params.dt0
    g = grad_J(d, u) / J
    gnorm = _tangent_norm(d, u, g)
    state.history.append(_record(d, u, 0.0, 0.0, J, gnorm))
    while True:
        rec = state.history[-1]
        if gnorm < params.tol:
            state.status = "near-critical"
            break
        if rec["lambda_fit"] * d.spacing > params.blowup:
            state.status = "escaped-to-infinity"
            break
        if state.t >= params.t_max * (1 - 1e-12):
            state.status = "t_max"
            break
        if state.steps >= params.max_steps:
            state.status = "max_steps"
            break
        dt = min(dt, params.t_max - state.t)
        while True:
            cand = u - g * dt
            if params.clamp:
                cand = cand.map(lambda v: np.maximum(v, 0.0))
            try:
                cand = normalize(d, cand)
                Jc = evaluate_J(d, cand).J
            except ValueError:
                Jc = math.inf
            if Jc <= J:
                break
            state.rejected += 1
            dt *= 0.5
            if dt < params.min_dt:
                state.status = "step-underflow"
                raise FlowError(f"step size fell below {params.min_dt:g} at t={state.t:g}", state)
        u, J = cand, Jc
        state.t += dt
        state.steps += 1
        state.u = u
        g = grad_J(d, u) / J
        gnorm = _tangent_norm(d, u, g)
        rec = _record(d, u, state.t, dt, J, gnorm)
        if params.fit_every and state.steps % params.fit_every == 0:
            fit = _fit_record(d, u, params.fit_p)
            rec["fit"] = fit
            if "lams" in fit:
                k = int(np.argmax(fit["alphas"]))
                rec["lambda_fit"] = fit["lams"][k]
                try:
                    rec["dist_fit"] = d.dist_to_boundary(np.asarray(fit["centers"][k]))
                except ValueError:
                    rec["dist_fit"] = math.nan
        state.history.append(rec)
        dt = min(2 * dt, params.dt0)
    return state


def _fit_record(d, u: ScalarField, p: int) -> dict:
    try:
        return fit_representation(d, u, p, max_iter=10).to_dict()
    except (ValueError, np.linalg.LinAlgError) as exc:
        return {"error": str(exc)}


# -------------------------------------------------------------- diagnostics


@dataclass
class ConcentrationReport:
    p: int
    fit: FitResult | None
    remainder: float
    eps: float
    scale_ok: list
    interaction_ok: dict
    in_V: bool
    error: str = ""

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "fit"}
        out["interaction_ok"] = {f"{i},{j}": ok for (i, j), ok in self.interaction_ok.items()}
        out["fit"] = self.fit.to_dict() if self.fit is not None else None
        return out


def concentration_diagnostics(state_or_field, p: int, eps: float = 0.05, d=None) -> ConcentrationReport:
    """Fit ``p`` bubbles to a flow state and test the ``V(p, eps)`` conditions.

    ``remainder`` is ``||u - sum alpha_i P delta_i||_E / ||u||_E``.  Fit
    failures are reported through ``error`` rather than raised.
    """
    from .bubbles import eps_ij

    if isinstance(state_or_field, FlowState):
        d, u = state_or_field.domain, state_or_field.u
    else:
        u = state_or_field
        d = d if d is not None else u.domain
    try:
        fit = fit_representation(d, u, p)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return ConcentrationReport(p, None, math.inf, eps, [], {}, False, str(exc))
    bs = [BubbleParams(c, l) for c, l in zip(fit.centers, fit.lams)]
    scale_ok = []
    for b in bs:
        try:
            scale_ok.append(bool(b.lam * d.dist_to_boundary(b.a) >= 1.0 / eps))
        except ValueError:
            scale_ok.append(False)
    inter = {(i, j): bool(eps_ij(bs[i], bs[j]) < eps) for i in range(p) for j in range(p) if i != j}
    ok = all(scale_ok) and all(inter.values()) and fit.relative_residual < eps
    return ConcentrationReport(p, fit, fit.relative_residual, eps, scale_ok, inter, ok,
                               "" if fit.converged else fit.message)


# ---------------------------------------------------------- canned initial data


def canned_initial(name: str, n: int = 5, **overrides) -> tuple[object, ScalarField]:
    """Domain and normalized initial state for the standard experiments.

    ``ball-bubble``: radial unit ball, centered ``P delta`` with ``lam = 5``.
    ``ball-bump``: radial unit ball, ``K[1]`` (the Navier torsion-like bump).
    ``annulus-two-bubble``: masked annulus ``0.5 < r < 1``, bubbles at ``±0.75 e_0``.
    """
    if name == "ball-bubble":
        d = make_domain("ball", n, R=1.0, M=overrides.get("M", 2001))
        u = project_bubble(d, BubbleParams(d.center, overrides.get("lam", 5.0)))
    elif name == "ball-bump":
        d = make_domain("ball", n, R=1.0, M=overrides.get("M", 2001))
        u, _ = navier_bilaplacian(d, ScalarField(d, np.ones(d.shape)))
    elif name == "annulus-two-bubble":
        d = make_domain("annulus", n, R_in=0.5, R_out=1.0, backend="masked", N=overrides.get("N", 15))
        if not isinstance(d, MaskedDomain):
            raise TypeError("annulus experiment needs the masked backend")
        h = d.spacing
        e0 = np.zeros(n)
        e0[0] = 1.0
        # centers snapped to the lattice so peaks sit on nodes
        cs = [np.rint((d.shape_tag.center + s * 0.75 * e0) / h) * h for s in (1, -1)]
        lam = overrides.get("lam", 3.0)
        u = project_configuration(d, Configuration.common([0.5, 0.5], cs, lam))
    else:
        raise ValueError(f"unknown initial state {name!r}")
    return d, normalize(d, u)


CANNED = ("ball-bubble", "ball-bump", "annulus-two-bubble")


def critical_dt(n: int) -> float:
    """Largest step for which the sphere update keeps positive states positive."""
    return 1.0 / critical_exponent(n)
