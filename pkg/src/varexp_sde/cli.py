"""Command-line entry point: one subcommand per experiment.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error,
3 numerical overflow.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import verify_asymptotic, verify_moment_bound, verify_stability
from .config import ExperimentConfig, load_config
from .errors import (ConfigError, DomainError, ExitTimeoutError, NonConvergenceError,
                     NumericalOverflowError, SchemeMismatchError)
from .exponents import (GridSpec, growth_certificate, lipschitz_constant, parse_exponent,
                        validate_class_s)
from .fk_poisson import (PoissonProblem, cross_validate, fd_convergence, manufactured_problem,
                         parse_source)
from .model import ModelSpec, feller_diagnostic, parse_coefficient
from .picard import solve_global
from .simulate import (PathGrid, constant, estimates_to_json, integral_sq, run_paths,
                       running_sup_abs, simulate_path, terminal)

OUTPUT_ENV = "VARSDE_OUTPUT_DIR"
COMMANDS = ("validate-exponent", "feller", "simulate", "picard", "moments", "asymptotic",
            "stability", "poisson")


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _clean(obj.item())
    return obj


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def build_model(cfg: ExperimentConfig, T: float | None = None) -> ModelSpec:
    mc = cfg["model"]
    T = mc["T"] if T is None else T
    try:
        mu = parse_coefficient(mc["mu"], T, mc["t0"], mc["mu_bounds"])
        sigma = parse_coefficient(mc["sigma"], T, mc["t0"], mc["sigma_bounds"])
        return ModelSpec(parse_exponent(mc["p"]), parse_exponent(mc["q"]), mu, sigma,
                         mc["x0"], T, mc["t0"], mc["allow_degenerate"])
    except DomainError as exc:
        raise ConfigError(f"[model]: {exc}") from exc


def _grid(cfg, m: ModelSpec) -> PathGrid:
    return PathGrid(m.t0, m.T, cfg["run"]["n_steps"])


def cmd_validate(cfg, out, threads):
    vc = cfg["validate"]
    grid = GridSpec(vc["grid_lo"], vc["grid_hi"], vc["grid_n"])
    names = vc["exponents"] or [cfg["model"]["p"], cfg["model"]["q"]]
    reports = []
    for name in names:
        try:
            f = parse_exponent(name)
        except DomainError as exc:
            raise ConfigError(f"validate.exponents: {exc}") from exc
        rep = validate_class_s(f, grid).to_dict()
        if rep["pass"]:
            cert = growth_certificate(f, grid)
            rep["growth_certificate"] = {"K": cert.K, "M_inf": cert.M_inf, "R_inf": cert.R_inf}
            rep["power_lipschitz"] = lipschitz_constant(f, f, 1.0, 0.0, grid)
        reports.append(rep)
    passed = all(r["pass"] for r in reports)
    (out / "validate.json").write_text(_dump({"exponents": reports, "pass": passed}))
    return passed


def cmd_feller(cfg, out, threads):
    m = build_model(cfg)
    fc = cfg["feller"]
    rep = feller_diagnostic(m, fc["t"], fc["x_grid"], fc["tol"])
    (out / "feller.json").write_text(_dump(rep.to_dict()))
    lines = ["x,T,T_lower_bound"] + [f"{x!r},{v!r},{lb!r}" for x, v, lb in
                                      zip(rep.x.tolist(), rep.values.tolist(),
                                          rep.lower_bound.tolist())]
    (out / "feller.csv").write_text("\n".join(lines) + "\n")
    return rep.passed


_OBSERVABLES = {
    "terminal": lambda: terminal(),
    "terminal_sq": lambda: terminal(2.0),
    "sup_abs": running_sup_abs,
    "integral_sq": integral_sq,
    "one": lambda: constant(1.0),
}


def cmd_simulate(cfg, out, threads):
    m = build_model(cfg)
    rc = cfg["run"]
    grid = _grid(cfg, m)
    try:
        obs = [_OBSERVABLES[name]() for name in cfg["simulate"]["observables"]]
    except KeyError as exc:
        raise ConfigError(f"simulate.observables: unknown observable {exc}") from exc
    res = run_paths(m, grid, rc["scheme"], rc["seed"], rc["n_paths"], obs, threads=threads)
    path = simulate_path(m, grid, rc["scheme"], rc["seed"], cfg["simulate"]["export_path"])
    (out / "simulate.json").write_text(_dump({
        "scheme": rc["scheme"], "estimates": [e.to_dict() for e in res.estimates()],
        "projections": res.total_projections, "pass": True}))
    (out / "path.csv").write_text(path.to_csv())
    return True


def cmd_picard(cfg, out, threads):
    m = build_model(cfg)
    rc = cfg["run"]
    res = solve_global(m, m.t0, m.T, cfg["picard"]["n_steps_per_interval"], rc["seed"],
                       cfg.n_paths("picard"), rc["tol"], rc["max_iter"], rc["c_target"])
    report = res.to_dict()
    report["pass"] = all(r.converged for r in res.intervals)
    (out / "picard.json").write_text(_dump(report))
    rows = ["interval,iteration,norm,norm_se,ratio,ratio_se"]
    for k, piece in enumerate(res.pieces):
        for line in piece.log_csv().splitlines()[1:]:
            rows.append(f"{k},{line}")
    (out / "picard_log.csv").write_text("\n".join(rows) + "\n")
    return report["pass"]


def cmd_moments(cfg, out, threads):
    m = build_model(cfg)
    rc, mc = cfg["run"], cfg["moments"]
    reports = []
    for order in mc["orders"]:
        rep = verify_moment_bound(m, order, _grid(cfg, m), rc["seed"], cfg.n_paths("moments"),
                                  mc["n_checkpoints"], rc["scheme"], mc["moment_x0m"], threads)
        reports.append(rep.to_dict())
        (out / f"moments_m{order:g}.csv").write_text(rep.to_csv())
    passed = all(r["pass"] for r in reports)
    (out / "moments.json").write_text(_dump({"reports": reports, "pass": passed}))
    return passed


def cmd_asymptotic(cfg, out, threads):
    ac = cfg["asymptotic"]
    m = build_model(cfg, T=max(cfg["model"]["T"], ac["T_long"]))
    grid = PathGrid(m.t0, ac["T_long"], ac["n_steps"])
    rep = verify_asymptotic(m, ac["T_long"], grid, cfg["run"]["seed"], cfg.n_paths("asymptotic"),
                            cfg["run"]["scheme"], ac["quantile"], threads)
    (out / "asymptotic.json").write_text(_dump(rep.to_dict()))
    return rep.passed


def cmd_stability(cfg, out, threads):
    m = build_model(cfg)
    sc, rc = cfg["stability"], cfg["run"]
    rep = verify_stability(m, sc["m"], sc["xi"], sc["eta"], _grid(cfg, m), rc["seed"],
                           cfg.n_paths("stability"), rc["scheme"], threads)
    (out / "stability.json").write_text(_dump(rep.to_dict()))
    return rep.passed


def cmd_poisson(cfg, out, threads):
    pc = cfg["poisson"]
    try:
        p = parse_exponent(pc["p"] or cfg["model"]["p"])
        q = parse_exponent(pc["q"] or cfg["model"]["q"])
        if pc["f"] == "manufactured":
            prob, _ = manufactured_problem(pc["a"], pc["b"], pc["c"], pc["mu"], pc["sigma"], p, q)
        else:
            prob = PoissonProblem(pc["a"], pc["b"], pc["c"], parse_source(pc["f"]), pc["mu"],
                                  pc["sigma"], p, q, pc["f"])
        for x in pc["probes"]:
            if not prob.a < x < prob.b:
                raise DomainError(f"probe {x} outside ({prob.a}, {prob.b})")
    except DomainError as exc:
        raise ConfigError(f"[poisson]: {exc}") from exc
    rep = cross_validate(prob, pc["probes"], pc["dt"], cfg.n_paths("poisson"), pc["n_grid"],
                         cfg["run"]["seed"], threads)
    conv = fd_convergence(prob)
    (out / "poisson.json").write_text(_dump({**rep.to_dict(), "fd_convergence": conv.to_dict(),
                                             "pass": rep.passed and conv.passed}))
    (out / "poisson_fd.csv").write_text(rep.fd.to_csv())
    return rep.passed and conv.passed


HANDLERS = {
    "validate-exponent": cmd_validate, "feller": cmd_feller, "simulate": cmd_simulate,
    "picard": cmd_picard, "moments": cmd_moments, "asymptotic": cmd_asymptotic,
    "stability": cmd_stability, "poisson": cmd_poisson,
}


def _manifest(cfg: ExperimentConfig, command: str, wall: float) -> str:
    versions = (f"varexp_sde={__version__} numpy={np.__version__} scipy={scipy.__version__} "
                f"python={platform.python_version()}")
    head = [
        "# varexp-sde run manifest",
        f"# subcommand: {command}",
        f"# config_sha256: {cfg.sha256()}",
        f"# seed: {cfg['run']['seed']}",
        f"# versions: {versions}",
        f"# wall_time_s: {wall:.3f}",
        "# the resolved configuration below can be passed back with --config",
        "",
    ]
    return "\n".join(head) + cfg.resolved_text()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varexp-sde", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI-style experiment config")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override any config key (repeatable)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--scheme", choices=("euler", "milstein", "gbm_exact"))
    ap.add_argument("--n-paths", type=int)
    ap.add_argument("--moment-x0m", action="store_true",
                    help="use E[x0^m] instead of E[x0^2] in the moment bound")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--output-dir", help=f"overrides ${OUTPUT_ENV} and [output] directory")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    for flag, key in (("seed", "run.seed"), ("tol", "run.tol"), ("scheme", "run.scheme"),
                      ("n_paths", "run.n_paths")):
        value = getattr(args, flag)
        if value is not None:
            overrides.append(f"{key}={value}")
    if args.moment_x0m:
        overrides.append("moments.moment_x0m=true")
    out_dir = args.output_dir or os.environ.get(OUTPUT_ENV)
    if out_dir:
        overrides.append(f"output.directory={out_dir}")
    try:
        text = Path(args.config).read_text() if args.config else ""
        cfg = load_config(text, overrides)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        passed = HANDLERS[args.command](cfg, out, max(1, args.threads))
    except (ConfigError, SchemeMismatchError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalOverflowError as exc:
        print(f"numerical overflow: {exc}", file=sys.stderr)
        return 3
    except (NonConvergenceError, ExitTimeoutError, DomainError) as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 1
    (out / "manifest.txt").write_text(_manifest(cfg, args.command, time.perf_counter() - start))
    print(f"{args.command}: {'pass' if passed else 'FAIL'} -> {out}")
    return 0 if passed else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
