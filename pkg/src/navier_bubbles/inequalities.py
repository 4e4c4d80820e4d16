"""Scalar inequalities behind the energy estimates, with seeded randomized scans."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_q(q: float, lower: float = 2.0):
    if not q > lower:
        raise ValueError(f"exponent q must exceed {lower}, got {q}")


def signed_power(x, q: float):
    """``sign(x) |x|^q``, the real power used for negative bases."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** q


def cross_sum(a, q: float):
    """``sum_{i != j} a_i^{q-1} a_j`` along the last axis."""
    a = np.asarray(a, dtype=float)
    return np.sum(a ** (q - 1) * (a.sum(axis=-1, keepdims=True) - a), axis=-1)


def superadditivity_gap(a, q: float, gamma: float):
    """``(sum a)^q - sum a^q - (gamma q / 2) sum_{i != j} a_i^{q-1} a_j``."""
    _check_q(q)
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("entries must be positive")
    return a.sum(axis=-1) ** q - np.sum(a**q, axis=-1) - 0.5 * gamma * q * cross_sum(a, q)


def gamma_max(a, q: float):
    """Largest ``gamma`` with nonnegative gap for the tuple(s) ``a`` (computed scale-free).

    Tuples are scaled by their largest entry and ``(1+s)^q - 1`` is evaluated
    with ``expm1``/``log1p`` so dominant-entry tuples keep their digits.
    """
    _check_q(q)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if np.any(a <= 0):
        raise ValueError("entries must be positive")
    a = -np.sort(-a, axis=-1)
    a = a / a[:, :1]
    rest = a[:, 1:]
    s = rest.sum(axis=-1)
    num = np.expm1(q * np.log1p(s)) - np.sum(rest**q, axis=-1)
    den = 0.5 * q * cross_sum(a, q)
    return num / den


def taylor_remainder_ratio(a, b, q: float):
    """``|(a+b)^q - a^q - q|a|^{q-1} b| / (|b|^q + |a|^{q-2} min(a^2, b^2))`` with signed powers.

    Zero where the denominator vanishes.
    """
    _check_q(q)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    num = np.abs(signed_power(a + b, q) - signed_power(a, q) - q * np.abs(a) ** (q - 1) * b)
    den = np.abs(b) ** q + np.abs(a) ** (q - 2) * np.minimum(a * a, b * b)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out if out.ndim else float(out)


def convexity_check(beta, values, q: float, atol: float = 1e-12):
    """Jensen defect ``sum beta_i x_i^q - (sum beta_i x_i)^q`` for simplex weights ``beta``."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(values, dtype=float)
    if np.any(beta < 0) or np.any(np.abs(beta.sum(axis=-1) - 1) > atol * 1e3):
        raise ValueError("weights must lie on the simplex")
    if np.any(x <= 0):
        raise ValueError("values must be positive")
    return np.sum(beta * x**q, axis=-1) - np.sum(beta * x, axis=-1) ** q


# ----------------------------------------------------------------------- scans


@dataclass(frozen=True)
class ScanReport:
    name: str
    q: float
    samples: int
    seed: int
    value: float
    worst: tuple

    def to_dict(self) -> dict:
        key = {"gamma": "gamma_star", "taylor": "M_star", "jensen": "min_defect"}[self.name]
        return {"q": self.q, "samples": self.samples, "seed": self.seed, key: self.value,
                "worst_case": list(self.worst)}


def _shards(samples: int, size: int = 5_000):
    while samples > 0:
        yield min(size, samples)
        samples -= size


def scan_gamma(q: float, samples: int = 100_000, seed: int = 0, max_p: int = 5,
               log_range: float = 6.0) -> ScanReport:
    """Empirical ``gamma* = min gamma_max`` over random tuples of length ``2..max_p``.

    Entries are log-uniform over ``log_range`` decades.
    """
    rng = np.random.default_rng(seed)
    best, worst = math.inf, ()
    for m in _shards(samples):
        p = int(rng.integers(2, max_p + 1))
        a = 10.0 ** rng.uniform(-log_range, 0.0, size=(m, p))
        g = gamma_max(a, q)
        k = int(np.argmin(g))
        if g[k] < best:
            best, worst = float(g[k]), tuple(float(v) for v in a[k])
    return ScanReport("gamma", q, samples, seed, best, worst)


def scan_taylor(q: float, samples: int = 1_000_000, seed: int = 0, bound: float = 10.0) -> ScanReport:
    """Empirical ``M* = sup ratio`` over ``(a, b)`` uniform in ``[-bound, bound]^2``."""
    rng = np.random.default_rng(seed)
    best, worst = -math.inf, ()
    for m in _shards(samples, 200_000):
        ab = rng.uniform(-bound, bound, size=(m, 2))
        r = taylor_remainder_ratio(ab[:, 0], ab[:, 1], q)
        k = int(np.argmax(r))
        if r[k] > best:
            best, worst = float(r[k]), (float(ab[k, 0]), float(ab[k, 1]))
    return ScanReport("taylor", q, samples, seed, best, worst)


def scan_jensen(q: float, samples: int = 100_000, seed: int = 0, max_p: int = 5) -> ScanReport:
    """Minimum Jensen defect over random simplex weights and values in ``(0, 1]``."""
    rng = np.random.default_rng(seed)
    best, worst = math.inf, ()
    for m in _shards(samples):
        p = int(rng.integers(2, max_p + 1))
        beta = rng.dirichlet(np.ones(p), size=m)
        x = 1.0 - rng.uniform(0.0, 1.0, size=(m, p))
        x = np.maximum(x, np.finfo(float).tiny)
        v = convexity_check(beta, x, q)
        k = int(np.argmin(v))
        if v[k] < best:
            best, worst = float(v[k]), (tuple(beta[k].tolist()), tuple(x[k].tolist()))
    return ScanReport("jensen", q, samples, seed, best, worst)
