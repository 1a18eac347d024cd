"""Dirichlet problem ``L u - c u = -f`` on ``(a, b)``, two ways.

``L = 0.5 sigma^2 x^{2q(x)} d2/dx2 + mu x^{p(x)} d/dx`` with constant
``mu, sigma`` and zero boundary data.  ``fd_solve`` is a second-order
finite-difference solver; ``fk_solve`` estimates

    u(x) = E^x [ int_0^tau exp(-c s) f(X_s) ds ]

by Euler paths stopped at the first grid time outside ``(a, b)``.  The
two are compared in ``cross_validate``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, ExitTimeoutError
from .exponents import ExponentFunction
from .simulate import X_FLOOR
from .streams import path_generator

BLOCK = 256
CHUNK = 4096
MAX_TIME = 1e3


@dataclass(frozen=True)
class PoissonProblem:
    a: float
    b: float
    c: float
    f: Callable[[np.ndarray], np.ndarray]
    mu: float
    sigma: float
    p: ExponentFunction
    q: ExponentFunction
    f_name: str = "custom"

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise DomainError(f"need 0 < a < b, got ({self.a}, {self.b})")
        if self.c < 0:
            raise DomainError("discount c must be non-negative")
        if not (self.mu > 0 and self.sigma > 0):
            raise DomainError("mu and sigma must be positive")
        if not self.ellipticity > 0:
            raise DomainError("operator is not uniformly elliptic")

    @property
    def ellipticity(self) -> float:
        """``0.5 sigma^2 min(a^{2 q_minus}, a^{2 q_plus})``."""
        a = self.a
        return 0.5 * self.sigma ** 2 * min(a ** (2 * self.q.h_minus), a ** (2 * self.q.h_plus))

    def drift(self, x):
        return self.mu * self.p.power(x)

    def half_var(self, x):
        """``0.5 sigma^2 x^{2q(x)}``."""
        return 0.5 * self.sigma ** 2 * self.q.power(x) ** 2

    def diffusion(self, x):
        return self.sigma * self.q.power(x)

    def drift_slope_bound(self) -> float:
        """Informational slope bound of ``x^{p(x)}`` on ``[a, b]`` from the (h3) constants."""
        p, a, b = self.p, self.a, self.b
        return max(b ** p.h_minus, b ** p.h_plus) * (
            (p.M0 + p.C0 * a ** (-(1 + p.alpha))) * math.log(b) + p.h_plus / a)

    def dt_limit(self) -> float:
        """Step-size heuristic ``(b - a)^2 / 100`` scaled by the largest diffusion rate."""
        x = np.linspace(self.a, self.b, 257)
        return (self.b - self.a) ** 2 / (100 * 2 * float(np.max(self.half_var(x))))


def parse_source(spec: str) -> Callable[[np.ndarray], np.ndarray]:
    """Builtin sources ``const:<v>`` and ``poly:<c0,c1,...>`` (``sum c_i x^i``).

    ``manufactured`` depends on the problem and is built by ``manufactured_problem``.
    """
    kind, _, args = spec.strip().partition(":")
    try:
        vals = [float(v) for v in args.split(",")] if args else []
    except ValueError as exc:
        raise DomainError(f"bad source {spec!r}") from exc
    if kind == "const" and len(vals) == 1:
        v = vals[0]
        return lambda x: np.full(np.shape(x), v)
    if kind == "poly" and vals:
        coeffs = vals[::-1]
        return lambda x: np.polyval(coeffs, np.asarray(x, dtype=float))
    raise DomainError(f"unknown source {spec!r}")


def manufactured_problem(a, b, c, mu, sigma, p, q):
    """Problem whose exact solution is ``u*(x) = sin(pi (x - a) / (b - a))``.

    Returns ``(problem, u_exact)``.
    """
    k = math.pi / (b - a)

    def u(x):
        return np.sin(k * (np.asarray(x, dtype=float) - a))

    def f(x):
        x = np.asarray(x, dtype=float)
        s, co = np.sin(k * (x - a)), np.cos(k * (x - a))
        lu = 0.5 * sigma ** 2 * q.power(x) ** 2 * (-k * k * s) + mu * p.power(x) * k * co
        return -(lu - c * s)

    return PoissonProblem(a, b, c, f, mu, sigma, p, q, "manufactured"), u


@dataclass
class FdSolution:
    x: np.ndarray
    u: np.ndarray
    residual: float

    def __call__(self, x):
        return np.interp(x, self.x, self.u)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "u"])
        for xi, ui in zip(self.x, self.u):
            w.writerow([repr(float(xi)), repr(float(ui))])
        return buf.getvalue()


def fd_system(prob: PoissonProblem, n_grid: int):
    """Tridiagonal system (scaled by ``h^2``) for the interior nodes.

    Returns ``(x, lower, diag, upper, rhs)``; ``lower[0]`` and ``upper[-1]``
    are unused.
    """
    if n_grid < 16:
        raise DomainError("n_grid must be at least 16")
    x = np.linspace(prob.a, prob.b, n_grid + 1)
    h = x[1] - x[0]
    xi = x[1:-1]
    D = prob.half_var(xi)
    B = prob.drift(xi)
    lower = D - 0.5 * h * B
    diag = -2 * D - prob.c * h * h
    upper = D + 0.5 * h * B
    rhs = -prob.f(xi) * h * h
    return x, lower, diag, upper, rhs


def fd_solve(prob: PoissonProblem, n_grid: int) -> FdSolution:
    """Central-difference solve with ``u(a) = u(b) = 0``."""
    x, lower, diag, upper, rhs = fd_system(prob, n_grid)
    ab = np.zeros((3, diag.size))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    try:
        ui = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise DomainError("finite-difference system is singular") from exc
    u = np.zeros_like(x)
    u[1:-1] = ui
    Au = diag * ui
    Au[1:] += lower[1:] * ui[:-1]
    Au[:-1] += upper[:-1] * ui[1:]
    residual = float(np.max(np.abs(Au - rhs)))
    return FdSolution(x, u, residual)


@dataclass(frozen=True)
class FdConvergence:
    n_grid: int
    error: float
    error_fine: float

    @property
    def ratio(self) -> float:
        return self.error / self.error_fine if self.error_fine > 0 else math.inf

    @property
    def passed(self) -> bool:
        return 3.5 <= self.ratio <= 4.5

    def to_dict(self) -> dict:
        return {"n_grid": self.n_grid, "max_error": self.error,
                "max_error_2n": self.error_fine, "richardson_ratio": self.ratio,
                "pass": self.passed}


def fd_convergence(prob: PoissonProblem, n_grid: int = 256) -> FdConvergence:
    """Max-norm error of ``fd_solve`` at ``n_grid`` and ``2 n_grid`` on the
    manufactured problem sharing ``prob``'s operator; the ratio should be near 4."""
    mp, u = manufactured_problem(prob.a, prob.b, prob.c, prob.mu, prob.sigma, prob.p, prob.q)
    errs = []
    for n in (n_grid, 2 * n_grid):
        sol = fd_solve(mp, n)
        errs.append(float(np.max(np.abs(sol.u - u(sol.x)))))
    return FdConvergence(n_grid, errs[0], errs[1])


@dataclass
class FkEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    mean_exit_time: float
    max_steps: int
    dt: float
    dt_limit: float
    samples: np.ndarray = field(repr=False, default=None)
    exit_positions: np.ndarray | None = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "n_paths": self.n_paths,
                "seed": self.seed, "mean_exit_time": self.mean_exit_time,
                "max_steps": self.max_steps, "dt": self.dt, "dt_limit": self.dt_limit,
                "dt_within_limit": self.dt <= self.dt_limit}


def _fk_chunk(prob: PoissonProblem, x_start: float, dt: float, seed: int, lo: int, hi: int,
              refine: bool, max_steps: int):
    """Run paths ``lo..hi-1``; with ``refine`` also a dt/2 run on the bridged path.

    Returns per-path ``(value, exit_step, exit_position)`` for the coarse run
    and ``(value, exit_half_step)`` for the refined one (zeros without ``refine``).
    """
    n = hi - lo
    a, b, c = prob.a, prob.b, prob.c
    sq = math.sqrt(dt)
    half = 0.5 * dt
    gens = [path_generator(seed, i) for i in range(lo, hi)]
    bridges = [path_generator(seed, i, stream=1) for i in range(lo, hi)] if refine else None

    val_c = np.zeros(n)
    exit_c = np.zeros(n, dtype=np.int64)
    pos_c = np.zeros(n)
    val_f = np.zeros(n)
    exit_f = np.zeros(n, dtype=np.int64)

    live = np.arange(n)
    Xc = np.full(n, float(x_start))
    Xf = Xc.copy()
    acc_c = np.zeros(n)
    acc_f = np.zeros(n)
    on_c = np.ones(n, dtype=bool)
    on_f = np.ones(n, dtype=bool) if refine else np.zeros(n, dtype=bool)

    def outside(x):
        return (x <= a) | (x >= b)

    k = 0
    while live.size:
        if k >= max_steps:
            raise ExitTimeoutError(f"{live.size} paths still inside after {max_steps} steps",
                                   int(live.size))
        Z = np.stack([gens[i].standard_normal(BLOCK) for i in live])
        Zb = np.stack([bridges[i].standard_normal(BLOCK) for i in live]) if refine else None
        for j in range(BLOCK):
            t = k * dt
            dW = sq * Z[:, j]
            w = math.exp(-c * t) * dt
            acc_c += np.where(on_c, w * prob.f(Xc), 0.0)
            Xc = np.where(on_c, Xc + prob.drift(Xc) * dt + prob.diffusion(Xc) * dW, Xc)
            np.maximum(Xc, X_FLOOR, out=Xc)
            out = on_c & outside(Xc)
            if out.any():
                exit_c[live[out]] = k + 1
                pos_c[live[out]] = Xc[out]
                on_c &= ~out
            if refine:
                dWa = 0.5 * dW + 0.5 * sq * Zb[:, j]
                for s, dWs in ((0, dWa), (1, dW - dWa)):
                    wf = math.exp(-c * (t + s * half)) * half
                    acc_f += np.where(on_f, wf * prob.f(Xf), 0.0)
                    Xf = np.where(on_f, Xf + prob.drift(Xf) * half + prob.diffusion(Xf) * dWs, Xf)
                    np.maximum(Xf, X_FLOOR, out=Xf)
                    out = on_f & outside(Xf)
                    if out.any():
                        exit_f[live[out]] = 2 * k + 1 + s
                        on_f &= ~out
            k += 1
            if not (on_c.any() or on_f.any()):
                break
        # compact: keep rows where either run is still inside
        done = ~(on_c | on_f)
        if done.any():
            idx = live[done]
            val_c[idx] = acc_c[done]
            val_f[idx] = acc_f[done]
            keep = ~done
            live, Xc, Xf, acc_c, acc_f = live[keep], Xc[keep], Xf[keep], acc_c[keep], acc_f[keep]
            on_c, on_f = on_c[keep], on_f[keep]
    return val_c, exit_c, pos_c, val_f, exit_f


def _fk_run(prob, x, dt, n_paths, seed, refine, threads, max_time):
    if not prob.a < x < prob.b:
        raise DomainError(f"probe {x} not inside ({prob.a}, {prob.b})")
    if n_paths < 2:
        raise DomainError("need at least 2 paths")
    max_steps = int(math.ceil(max_time / dt))
    bounds = [(lo, min(lo + CHUNK, n_paths)) for lo in range(0, n_paths, CHUNK)]
    out = [None] * len(bounds)

    def work(i):
        out[i] = _fk_chunk(prob, x, dt, seed, *bounds[i], refine, max_steps)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(len(bounds))))
    else:
        for i in range(len(bounds)):
            work(i)
    return [np.concatenate(parts) for parts in zip(*out)]


def _summarize(vals, exits, dt, n_paths, seed, prob, positions=None):
    se = float(np.std(vals, ddof=1) / math.sqrt(n_paths))
    return FkEstimate(float(np.mean(vals)), se, n_paths, seed, float(np.mean(exits) * dt),
                      int(np.max(exits)), dt, prob.dt_limit(), vals, positions)


def fk_solve(prob: PoissonProblem, x: float, dt: float, n_paths: int, seed: int,
             threads: int = 1, max_time: float = MAX_TIME) -> FkEstimate:
    """Feynman-Kac estimate of ``u(x)`` from Euler paths stopped on leaving ``(a, b)``."""
    vals, exits, pos, _, _ = _fk_run(prob, x, dt, n_paths, seed, False, threads, max_time)
    return _summarize(vals, exits, dt, n_paths, seed, prob, pos)


def fk_solve_pair(prob: PoissonProblem, x: float, dt: float, n_paths: int, seed: int,
                  threads: int = 1, max_time: float = MAX_TIME):
    """Estimates at ``dt`` and ``dt/2`` on the same Brownian paths.

    The ``dt`` estimate is identical to ``fk_solve``; the ``dt/2`` run splits
    each increment with an independent Brownian-bridge draw.
    """
    vc, ec, pc, vf, ef = _fk_run(prob, x, dt, n_paths, seed, True, threads, max_time)
    return (_summarize(vc, ec, dt, n_paths, seed, prob, pc),
            _summarize(vf, ef, dt / 2, n_paths, seed, prob))


@dataclass
class ProbeResult:
    probe: float
    fk_mean: float
    fk_se: float
    fd_value: float
    diff: float
    c_bias: float
    allowance: float
    mean_exit_time: float
    fk_half_dt: float

    @property
    def passed(self) -> bool:
        return self.diff <= 3 * self.fk_se + self.allowance

    def to_dict(self) -> dict:
        d = dict(vars(self))
        d["pass"] = self.passed
        return d


@dataclass
class CrossValidationReport:
    probes: list[ProbeResult]
    dt: float
    n_grid: int
    n_paths: int
    seed: int
    fd: FdSolution = field(repr=False)
    fd_residual: float = 0.0
    drift_slope_bound: float = 0.0

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.probes)

    def to_dict(self) -> dict:
        return {"dt": self.dt, "n_grid": self.n_grid, "n_paths": self.n_paths, "seed": self.seed,
                "fd_residual": self.fd_residual, "drift_slope_bound": self.drift_slope_bound,
                "probes": [p.to_dict() for p in self.probes], "pass": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def bias_constant(coarse: np.ndarray, fine: np.ndarray, dt: float) -> float:
    """``C`` in ``bias(dt) ~ C sqrt(dt)`` from paired dt / dt/2 samples.

    Uses the upper 3-SE end of the paired difference.
    """
    d = coarse - fine
    gap = abs(float(np.mean(d))) + 3 * float(np.std(d, ddof=1) / math.sqrt(d.size))
    return gap / (math.sqrt(dt) * (1 - 1 / math.sqrt(2)))


def cross_validate(prob: PoissonProblem, probes: Sequence[float], dt: float, n_paths: int,
                   n_grid: int, seed: int, threads: int = 1) -> CrossValidationReport:
    """Compare Feynman-Kac and finite-difference values at each probe.

    A probe passes when ``|fk - fd| <= 3 SE + C_bias sqrt(dt)``, with
    ``C_bias`` calibrated from the paired dt-halving run.
    """
    fd = fd_solve(prob, n_grid)
    rows = []
    for x in probes:
        coarse, fine = fk_solve_pair(prob, x, dt, n_paths, seed, threads)
        cb = bias_constant(coarse.samples, fine.samples, dt)
        fdv = float(fd(x))
        rows.append(ProbeResult(float(x), coarse.mean, coarse.std_error, fdv,
                                abs(coarse.mean - fdv), cb, cb * math.sqrt(dt),
                                coarse.mean_exit_time, fine.mean))
    return CrossValidationReport(rows, dt, n_grid, n_paths, seed, fd, fd.residual,
                                 prob.drift_slope_bound())
