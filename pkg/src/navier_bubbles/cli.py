"""Command line front end: every verification as a reproducible batch command.

Each run writes its artifacts plus ``manifest.json`` into the output directory.
Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 ``--check``
threshold failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bubbles import (
    BubbleParams,
    Configuration,
    constant_c2,
    constant_c2_closed_form,
    constant_S_quarter,
    constants,
    phi,
    project_bubble,
    project_configuration,
)
from .config import ConfigError, RunConfig, jsonable
from .energy import ResolutionError, check_upper_bounds, evaluate_J, verify_expansion
from .fitting import fit_representation
from .flow import FlowError, FlowParams, canned_initial, flow_run
from .green import green_matrix, validate_lemma_a1
from .grid import DomainError, ScalarField, load_field, save_field
from .inequalities import scan_gamma, scan_jensen, scan_taylor
from .solvers import SolverError, navier_bilaplacian

EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 2, 3, 4

# command defaults; config files and flags override them in that order
DEFAULTS = {
    "constants": {},
    "solve": {"domain": "box", "N": 15},
    "project-bubble": {"lam": 20.0, "M": 4097},
    "green": {"M": 4097},
    "verify-lemma-a1": {"lambdas": "20:160:x2", "M": 65537},
    "verify-expansion": {"lambdas": "20:320:x2", "M": 16385},
    "bounds": {"domain": "box", "side": 0.25, "N": 23, "p": 2, "lam": 20.0},
    "flow": {},
    "fit": {"domain": "box", "side": 1.0, "N": 15, "lam": 10.0, "centers": [[0.47, 0.52, 0.5, 0.49, 0.51]]},
    "inequalities": {},
}
P2_EXPANSION = {"domain": "box", "side": 0.25, "N": 23, "lambdas": "10:20:+5"}

# flag name -> config key
FLAGS = {
    "n": int, "domain": str, "backend": str, "R": float, "R_in": float, "R_out": float, "side": float,
    "N": int, "M": int, "lambdas": str, "lam": float, "p": int, "shift": float, "eps": float,
    "eps1": float, "seed": int, "dt0": float, "tmax": float, "tol": float, "max_steps": int,
    "fit_every": int, "init": str, "q": float, "samples": int, "out": str, "rhs": str,
}
RENAME = {"tmax": "t_max"}


# ----------------------------------------------------------------- output


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_json(path: Path, obj):
    path.write_text(json.dumps(jsonable(obj), indent=1, sort_keys=True) + "\n")


class Run:
    def __init__(self, command: str, cfg: RunConfig, outdir: Path):
        self.command, self.cfg, self.outdir = command, cfg, outdir
        self.outputs: list[str] = []
        self.checks: dict = {}
        self.results: dict = {}
        self.t0 = time.perf_counter()
        outdir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.outdir / name

    def check(self, name: str, ok: bool, value=None, threshold=None):
        self.checks[name] = {"ok": bool(ok), "value": value, "threshold": threshold}

    def manifest(self, status: str):
        c = constants(self.cfg.n)
        write_json(self.outdir / "manifest.json", {
            "command": self.command, "status": status, "config": self.cfg.to_dict(),
            "constants": c.to_dict(), "results": self.results, "checks": self.checks,
            "outputs": self.outputs, "wall_time_s": time.perf_counter() - self.t0,
            "versions": {"navier_bubbles": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
        })


# --------------------------------------------------------------- commands


def cmd_constants(run: Run):
    n = run.cfg.n
    c = constants(n)
    out = c.to_dict()
    c2q, c2c = constant_c2(n), constant_c2_closed_form(n)
    sp, sl = constant_S_quarter(n, formula="power"), constant_S_quarter(n, formula="laplacian")
    out["checks"] = {"c2_closed_form": c2c, "c2_rel_error": abs(c2q / c2c - 1),
                     "S_quarter_power": sp, "S_quarter_laplacian": sl, "S_quarter_rel_gap": abs(sp / sl - 1)}
    write_json(run.path("constants.json"), out)
    run.results.update(out["checks"])
    run.check("c2_closed_form", out["checks"]["c2_rel_error"] <= 1e-8, out["checks"]["c2_rel_error"], 1e-8)
    run.check("S_dual_definition", out["checks"]["S_quarter_rel_gap"] <= 1e-7, out["checks"]["S_quarter_rel_gap"], 1e-7)


def _rhs(cfg: RunConfig, d) -> ScalarField:
    if cfg.rhs == "one":
        return ScalarField(d, np.ones(d.shape))
    if cfg.rhs == "sine":
        from .grid import BoxGrid

        if not isinstance(d, BoxGrid):
            raise ConfigError("rhs 'sine' needs the box domain")
        k = math.pi / d.side
        vals = np.ones(d.shape)
        for g in d.axes():
            vals = vals * np.sin(k * g)
        return ScalarField(d, vals)
    raise ConfigError(f"unknown rhs {cfg.rhs!r}")


def cmd_solve(run: Run):
    d = run.cfg.make_domain()
    u, rep = navier_bilaplacian(d, _rhs(run.cfg, d))
    save_field(u, run.outdir / "solution")
    run.outputs += ["solution.json", "solution.bin"]
    run.results.update({"iterations": rep.iterations, "residual": rep.residual_norm,
                        "backend": rep.backend, "max_u": u.max(), "min_u": u.min()})
    write_json(run.path("solve.json"), run.results)
    run.check("residual", rep.residual_norm <= 1e-8, rep.residual_norm, 1e-8)


def cmd_project_bubble(run: Run):
    cfg = run.cfg
    d = cfg.make_domain()
    a = cfg.bubble_centers(d)[0]
    b = BubbleParams(a, cfg.lam)
    u, rep = project_bubble(d, b, with_report=True)
    e = evaluate_J(d, u)
    ph = phi(d, b)
    save_field(u, run.outdir / "pdelta")
    run.outputs += ["pdelta.json", "pdelta.bin"]
    run.results.update({"A": e.A, "D": e.D, "J": e.J, "J_over_S": e.J / constants(d.n).S,
                        "level": e.level, "phi_max": ph.max(), "phi_min": ph.min(),
                        "residual": rep.residual_norm})
    write_json(run.path("project_bubble.json"), run.results)
    run.check("phi_nonnegative", ph.min() >= -1e-10 * ph.max(), ph.min(), 0.0)


def cmd_green(run: Run):
    cfg = run.cfg
    d = cfg.make_domain()
    pts = cfg.bubble_centers(d) if cfg.source is None else np.atleast_2d(cfg.source)
    Hd, G = green_matrix(d, pts)
    write_csv(run.path("h_diag.csv"), ["i"] + [f"x{k}" for k in range(d.n)] + ["H_diag"],
              [[i, *p, h] for i, (p, h) in enumerate(zip(pts, Hd))])
    write_csv(run.path("g_matrix.csv"), ["i", "j", "G"],
              [[i, j, G[i, j]] for i in range(len(pts)) for j in range(len(pts)) if i != j])
    run.results.update({"H_diag": Hd, "G": G})
    run.check("H_positive", bool(np.all(Hd > 0)), float(np.min(Hd)), 0.0)


def cmd_lemma_a1(run: Run):
    cfg = run.cfg
    d = cfg.make_domain()
    a = cfg.bubble_centers(d)[0]
    rep = validate_lemma_a1(d, a, cfg.lambdas, cfg.richardson)
    write_csv(run.path("lemma_a1.csv"), ["lambda", "error"], rep.rows())
    run.results.update({"slope": rep.slope, "expected_slope": -2.0, "richardson": rep.richardson})
    write_json(run.path("lemma_a1.json"), run.results)
    run.check("slope", abs(rep.slope + 2.0) <= 0.3, rep.slope, "-2 +- 0.3")


def cmd_expansion(run: Run):
    cfg = run.cfg
    d = cfg.make_domain()
    cs = cfg.bubble_centers(d)
    c = Configuration.common(cfg.weights(), cs, cfg.lambdas[0])
    rep = verify_expansion(d, c, cfg.lambdas, richardson=cfg.richardson)
    write_csv(run.path("expansion.csv"), ["lambda", "J_num", "Psi", "residual"], rep.rows())
    summary = rep.summary()
    run.results.update(summary)
    if c.p == 1:
        rel = summary["coefficient_rel_error"]
        run.check("coefficient", rel <= 0.05, rel, 0.05)
        run.check("order", rep.fitted_order <= -2.5, rep.fitted_order, -2.5)
    else:
        meas = rep.J_num - rep.psi_limit
        pred = rep.psi - rep.psi_limit
        ratio = meas / pred
        summary["deviation_measured"] = meas.tolist()
        summary["deviation_predicted"] = pred.tolist()
        summary["deviation_ratio"] = ratio.tolist()
        run.check("sign", bool(np.all(np.sign(meas) == np.sign(pred))), None, "same sign")
        run.check("magnitude", bool(np.all((ratio >= 0.5) & (ratio <= 2.0))), ratio.tolist(), "[0.5, 2]")
    write_json(run.path("expansion.json"), summary)


def cmd_bounds(run: Run):
    cfg = run.cfg
    d = cfg.make_domain()
    cs = cfg.bubble_centers(d)
    lam = cfg.lam
    main = check_upper_bounds(d, Configuration.common(cfg.weights(), cs, lam), lam, cfg.eps, cfg.eps1)
    out = {"large_lambda": main.to_dict()}
    run.check("large_lambda", main.large_lambda_ok, main.J / main.large_lambda_bound, "J / bound <= 1")
    if cfg.p >= 2:
        small = np.full(cfg.p, cfg.eps1)
        small[0] = 1.0 - cfg.eps1 * (cfg.p - 1)
        rep = check_upper_bounds(d, Configuration.common(small, cs, lam), lam, cfg.eps, cfg.eps1)
        out["small_weight"] = rep.to_dict()
        run.check("small_weight", bool(rep.small_weight_ok), rep.J / rep.small_weight_bound, "J / bound <= 1")
    run.results.update(out)
    write_json(run.path("bounds.json"), out)


def cmd_flow(run: Run):
    cfg = run.cfg
    overrides = {k: v for k, v in (("N", cfg.N), ("M", cfg.M), ("lam", cfg.lam)) if v is not None}
    d, u0 = canned_initial(cfg.init, cfg.n, **overrides)
    dt0 = cfg.dt0 or (0.002 if cfg.init == "annulus-two-bubble" else 0.05)
    params = FlowParams(dt0=dt0, t_max=cfg.t_max, tol=cfg.tol, max_steps=cfg.max_steps,
                        clamp=cfg.clamp, fit_every=cfg.fit_every)
    st = flow_run(d, u0, params)
    cols = ["t", "J", "min_u", "lambda_fit", "dist_fit", "max_u", "dt", "grad_norm", "norm_drift"]
    write_csv(run.path("trajectory.csv"), cols, [[h[k] for k in cols] for h in st.history])
    save_field(st.u, run.outdir / "final")
    run.outputs += ["final.json", "final.bin"]
    J = st.column("J")
    mn, mx = st.column("min_u"), st.column("max_u")
    drift = float(np.max(st.column("norm_drift")))
    pos = float(np.min(mn / mx))
    run.results.update({"status": st.status, "steps": st.steps, "rejected": st.rejected, "t": st.t,
                        "J_final": float(J[-1]), "J_final_over_S": float(J[-1] / constants(cfg.n).S),
                        "max_norm_drift": drift, "min_ratio": pos, "dt0": dt0})
    run.check("monotone", bool(np.all(np.diff(J) <= 0)), float(np.max(np.diff(J), initial=-np.inf)), 0.0)
    run.check("normalization", drift <= 1e-12, drift, 1e-12)
    run.check("positivity", pos >= -1e-6, pos, -1e-6)


def cmd_fit(run: Run):
    cfg = run.cfg
    d = cfg.make_domain()
    truth = None
    if cfg.source is not None and isinstance(cfg.source, str):
        u = load_field(cfg.source)
        d = u.domain
    else:
        cs = cfg.bubble_centers(d)
        truth = Configuration.common(cfg.weights(), cs, cfg.lam)
        u = project_configuration(d, truth)
    fit = fit_representation(d, u, cfg.p, seed=cfg.seed if cfg.seed else None)
    run.results.update(fit.to_dict())
    if truth is not None:
        # match fitted to planted bubbles by nearest center
        errs_a, errs_l = [], []
        for a, l in zip(truth.centers, truth.lams):
            k = int(np.argmin(np.linalg.norm(fit.centers - a, axis=1)))
            errs_a.append(float(np.linalg.norm(fit.centers[k] - a)))
            errs_l.append(abs(fit.lams[k] / l - 1))
        run.results.update({"center_error_over_h": max(errs_a) / d.spacing, "lambda_rel_error": max(errs_l)})
        run.check("center", max(errs_a) <= d.spacing, max(errs_a) / d.spacing, 1.0)
        run.check("lambda", max(errs_l) <= 1e-3, max(errs_l), 1e-3)
    write_json(run.path("fit.json"), run.results)


def cmd_inequalities(run: Run):
    cfg = run.cfg
    g = scan_gamma(cfg.q, cfg.samples or 100_000, cfg.seed)
    t = scan_taylor(cfg.q, cfg.samples or 1_000_000, cfg.seed)
    j = scan_jensen(cfg.q, cfg.samples or 100_000, cfg.seed)
    out = {"superadditivity": g.to_dict(), "taylor": t.to_dict(), "jensen": j.to_dict()}
    run.results.update(out)
    write_json(run.path("inequalities.json"), out)
    run.check("gamma_star", g.value > 1, g.value, "> 1")
    run.check("M_star", math.isfinite(t.value), t.value, "finite")
    run.check("jensen", j.value >= -1e-12, j.value, -1e-12)


COMMANDS = {
    "constants": cmd_constants, "solve": cmd_solve, "project-bubble": cmd_project_bubble,
    "green": cmd_green, "verify-lemma-a1": cmd_lemma_a1, "verify-expansion": cmd_expansion,
    "bounds": cmd_bounds, "flow": cmd_flow, "fit": cmd_fit, "inequalities": cmd_inequalities,
}


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--check", action="store_true", help="exit 4 if an acceptance threshold fails")
    for name, typ in FLAGS.items():
        common.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    common.add_argument("--alphas", type=str, default=None, help="comma separated weights")
    common.add_argument("--centers", type=str, default=None, help="JSON list of points")
    common.add_argument("--source", type=str, default=None, help="JSON point (green) or snapshot prefix (fit)")
    common.add_argument("--richardson", choices=["on", "off"], default=None)
    common.add_argument("--clamp", action="store_true", default=None)
    parser = argparse.ArgumentParser(prog="navier-bubbles", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data = dict(DEFAULTS[args.command])
    if args.command == "verify-expansion" and args.p and args.p >= 2:
        data.update(P2_EXPANSION)
    if args.config:
        raw = RunConfig.from_json(args.config).to_dict()
        file_keys = json.loads(Path(args.config).read_text()).keys()
        data.update({k: raw[k] for k in file_keys})
    for name in FLAGS:
        v = getattr(args, name)
        if v is not None:
            data[RENAME.get(name, name)] = v
    if args.alphas is not None:
        data["alphas"] = [float(v) for v in args.alphas.split(",")]
    for key in ("centers", "source"):
        v = getattr(args, key)
        if v is not None:
            try:
                data[key] = json.loads(v)
            except json.JSONDecodeError:
                if key == "source":
                    data[key] = v
                else:
                    raise ConfigError(f"--{key} must be JSON")
    if args.richardson is not None:
        data["richardson"] = args.richardson == "on"
    if args.clamp:
        data["clamp"] = True
    if "out" not in data:
        data["out"] = str(Path("runs") / args.command)
    if data.get("lam") is None and data.get("lambdas"):
        data["lam"] = max(RunConfig.from_dict({"lambdas": data["lambdas"]}).lambdas)
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args.command, cfg, Path(cfg.out))
    try:
        COMMANDS[args.command](run)
    except (ConfigError, DomainError, ResolutionError) as exc:
        run.results["error"] = str(exc)
        run.manifest("config-error")
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, FlowError) as exc:
        run.results["error"] = str(exc)
        run.manifest("solver-failure")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    failed = [k for k, v in run.checks.items() if not v["ok"]]
    run.manifest("check-failed" if failed else "ok")
    print(json.dumps(jsonable({"command": args.command, "checks": run.checks, "out": str(run.outdir)})))
    if args.check and failed:
        print(f"check failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return 0


if __name__ == "__main__":
    sys.exit(main())
