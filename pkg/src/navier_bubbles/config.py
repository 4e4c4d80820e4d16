"""Run configuration shared by the command line and the experiment scripts."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    pass


def parse_lambdas(spec) -> list[float]:
    """``"20:320:x2"`` (geometric), ``"10:20:+5"`` (arithmetic) or ``"10,15,20"``."""
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    s = str(spec).strip()
    if ":" in s:
        try:
            lo, hi, step = s.split(":")
            lo, hi = float(lo), float(hi)
            out = [lo]
            if step.startswith("x"):
                r = float(step[1:])
                if r <= 1:
                    raise ConfigError("geometric ratio must exceed 1")
                while out[-1] * r <= hi * (1 + 1e-12):
                    out.append(out[-1] * r)
            else:
                dstep = float(step.lstrip("+"))
                if dstep <= 0:
                    raise ConfigError("arithmetic step must be positive")
                k = 1
                while lo + k * dstep <= hi * (1 + 1e-12):
                    out.append(lo + k * dstep)
                    k += 1
            return out
        except ValueError as exc:
            raise ConfigError(f"bad lambda sweep {s!r}: {exc}") from exc
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad lambda list {s!r}") from exc


@dataclass
class RunConfig:
    n: int = 5
    domain: str = "ball"  # ball | annulus | box
    backend: str | None = None  # radial | masked (ball/annulus); box uses the sine transform
    R: float = 1.0
    R_in: float = 0.5
    R_out: float = 1.0
    side: float | None = None
    N: int | None = None
    M: int | None = None
    lambdas: list = field(default_factory=list)
    lam: float | None = None
    p: int = 1
    alphas: list | None = None
    centers: list | None = None
    shift: float = 6.0  # two-bubble half separation in mesh widths
    eps: float = 0.1
    eps1: float = 0.01
    seed: int = 0
    richardson: bool | None = None
    source: list | None = None
    rhs: str = "one"
    dt0: float | None = None
    t_max: float = 50.0
    tol: float = 1e-6
    max_steps: int = 5000
    clamp: bool = False
    fit_every: int = 0
    init: str = "ball-bubble"
    q: float = 10.0
    samples: int | None = None
    out: str = "runs"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def validate(self):
        if self.n < 5:
            raise ConfigError("n must be at least 5")
        if self.domain not in ("ball", "annulus", "box"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.backend not in (None, "radial", "masked", "box"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.p < 1:
            raise ConfigError("p must be at least 1")
        if self.alphas is not None and len(self.alphas) != self.p:
            raise ConfigError("alphas must have p entries")
        if self.centers is not None and len(self.centers) != self.p:
            raise ConfigError("centers must have p entries")
        self.lambdas = parse_lambdas(self.lambdas) if self.lambdas else []
        for v in self.lambdas:
            if not v > 0:
                raise ConfigError("concentrations must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    # ------------------------------------------------------------ builders

    def make_domain(self):
        from .grid import make_domain

        if self.domain == "box":
            return make_domain("box", self.n, side=self.side or 1.0, N=self.N or 23)
        params = {"R": self.R} if self.domain == "ball" else {"R_in": self.R_in, "R_out": self.R_out}
        backend = self.backend or "radial"
        params["backend"] = backend
        if backend == "radial":
            params["M"] = self.M or 2001
        else:
            if self.N:
                params["N"] = self.N
            if self.side:
                params["side"] = self.side
        return make_domain(self.domain, self.n, **params)

    def weights(self) -> np.ndarray:
        if self.alphas is not None:
            return np.asarray(self.alphas, dtype=float)
        return np.full(self.p, 1.0 / self.p)

    def bubble_centers(self, d) -> np.ndarray:
        """Configured centers, else the domain center (p=1) or a pair along the first axis."""
        if self.centers is not None:
            return np.asarray(self.centers, dtype=float)
        from .grid import RadialGrid

        c = d.center if isinstance(d, RadialGrid) else _domain_center(d)
        if self.p == 1:
            return c[None, :]
        if self.p == 2:
            e0 = np.zeros(self.n)
            e0[0] = self.shift * d.spacing
            return np.stack([c + e0, c - e0])
        raise ConfigError("centers must be given explicitly for p > 2")


def _domain_center(d) -> np.ndarray:
    from .grid import BoxGrid

    if isinstance(d, BoxGrid):
        return d.center
    return np.asarray(d.shape_tag.center, dtype=float)


def jsonable(obj):
    """Recursively convert numpy values and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
