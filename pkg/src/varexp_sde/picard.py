"""Picard iteration for the integral map on discretized path ensembles.

The map is

    (Phi X)(t_k) = x0 + sum_{j<k} mu(t_j) X_j**p dt + sum_{j<k} sigma(t_j) X_j**q dW_j

applied pathwise on a shared set of Brownian increments.  On an interval of
length ``tau`` it contracts in the norm ``sqrt(E int |X|^2 dt)`` with
constant ``c(tau) = sqrt(2 L^2 tau (tau mu_+^2 + sigma_+^2))``, where ``L``
bounds the slopes of ``x**p(x)`` and ``x**q(x)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonConvergenceError, ShapeError
from .exponents import SAFETY_FACTOR, power_lipschitz
from .model import ModelSpec
from .simulate import X_FLOOR, PathGrid, trapezoid
from .streams import brownian_increments

C_TARGET = 0.5
C_FORMULA = "c(tau) = sqrt(2 L^2 tau (tau mu_+^2 + sigma_+^2)), tau = interval length"


@dataclass(frozen=True)
class ContractionPlan:
    L: float
    mu_plus: float
    sigma_plus: float
    T_star: float
    n_intervals: int
    c_target: float = C_TARGET
    formula: str = C_FORMULA

    def c_of(self, tau: float) -> float:
        return math.sqrt(2 * self.L ** 2 * tau * (tau * self.mu_plus ** 2 + self.sigma_plus ** 2))


def state_lipschitz(m: ModelSpec) -> float:
    """Common slope bound ``L`` of ``x**p(x)`` and ``x**q(x)`` (safety factor included)."""
    return SAFETY_FACTOR * max(power_lipschitz(m.p, m.grid), power_lipschitz(m.q, m.grid))


def largest_interval(L: float, mu_plus: float, sigma_plus: float, c_target: float) -> float:
    """Largest ``tau`` with ``c(tau) <= c_target`` (positive root of a quadratic)."""
    a = 2 * L * L * mu_plus * mu_plus
    b = 2 * L * L * sigma_plus * sigma_plus
    c2 = c_target * c_target
    if a == 0 and b == 0:
        return math.inf
    if a == 0:
        return c2 / b
    # stable form of (-b + sqrt(b^2 + 4 a c2)) / (2a)
    return 2 * c2 / (b + math.sqrt(b * b + 4 * a * c2))


def contraction_plan(m: ModelSpec, t0: float | None = None, T: float | None = None,
                     c_target: float = C_TARGET) -> ContractionPlan:
    if not 0 < c_target < 1:
        raise DomainError("c_target must lie in (0, 1)")
    t0 = m.t0 if t0 is None else t0
    T = m.T if T is None else T
    L = state_lipschitz(m)
    span = T - t0
    T_star = min(span, largest_interval(L, m.mu_plus_bar, m.sigma_plus_bar, c_target))
    n_int = max(1, math.ceil(span / T_star - 1e-9))
    return ContractionPlan(L, m.mu_plus_bar, m.sigma_plus_bar, T_star, n_int, c_target)


def phi_apply(m: ModelSpec, grid: PathGrid, X: np.ndarray, dW: np.ndarray, x0=None) -> np.ndarray:
    """One application of the integral map to every path of ``X``."""
    X = np.asarray(X, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if X.ndim != 2 or dW.ndim != 2:
        raise ShapeError("ensembles must be 2-d (paths x grid points)")
    if X.shape[1] != grid.n_steps + 1 or dW.shape[1] != grid.n_steps:
        raise ShapeError(f"ensemble shape {X.shape} / increments {dW.shape} do not match "
                         f"a grid with {grid.n_steps} steps")
    if X.shape[0] != dW.shape[0]:
        raise ShapeError(f"{X.shape[0]} paths but {dW.shape[0]} increment rows")
    x0 = m.x0 if x0 is None else x0
    t = grid.times[:-1]
    Xl = X[:, :-1]
    incr = (m.mu(t) * m.p.power(Xl) * grid.dt) + (m.sigma(t) * m.q.power(Xl) * dW)
    out = np.empty_like(X)
    out[:, 0] = x0
    np.cumsum(incr, axis=1, out=out[:, 1:])
    out[:, 1:] += np.asarray(x0, dtype=float).reshape(-1, 1) if np.ndim(x0) else x0
    np.maximum(out, X_FLOOR, out=out)
    return out


def norm_sq_samples(D: np.ndarray, grid: PathGrid) -> np.ndarray:
    """Per-path trapezoid of ``D**2`` over the grid."""
    return trapezoid(D * D, grid.times, axis=1)


def ensemble_norm(D: np.ndarray, grid: PathGrid) -> tuple[float, float]:
    """Monte Carlo estimate of ``sqrt(E int D^2 dt)`` and its delta-method standard error."""
    s = norm_sq_samples(D, grid)
    mean = float(np.mean(s))
    se_mean = float(np.std(s, ddof=1) / math.sqrt(s.size)) if s.size > 1 else 0.0
    norm = math.sqrt(mean)
    se = se_mean / (2 * norm) if norm > 0 else 0.0
    return norm, se


@dataclass
class IterationRecord:
    iteration: int
    norm: float
    norm_se: float
    ratio: float | None = None
    ratio_se: float | None = None


@dataclass
class FixedPointResult:
    ensemble: np.ndarray
    log: list[IterationRecord]
    converged: bool
    grid: PathGrid
    dW: np.ndarray
    residual: float = float("nan")

    @property
    def iterations(self) -> int:
        return len(self.log)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "norm", "norm_se", "ratio", "ratio_se"])
        for r in self.log:
            w.writerow([r.iteration, repr(r.norm), repr(r.norm_se),
                        "" if r.ratio is None else repr(r.ratio),
                        "" if r.ratio_se is None else repr(r.ratio_se)])
        return buf.getvalue()


def solve_fixed_point(m: ModelSpec, grid: PathGrid, seed: int, n_paths: int, tol: float,
                      max_iter: int = 100, x_init: float | None = None, x0=None,
                      dW: np.ndarray | None = None, plan: ContractionPlan | None = None,
                      path_offset: int = 0) -> FixedPointResult:
    """Iterate ``X_{n+1} = Phi X_n`` from the constant path ``x_init``.

    Stops once the estimated norm of ``X_{n+1} - X_n`` drops below ``tol``.
    Hitting ``max_iter`` with the last ratio below 1 returns an unconverged
    result; a ratio of 1 or more raises NonConvergenceError.
    """
    plan = plan or contraction_plan(m, grid.t0, grid.T)
    tau = grid.T - grid.t0
    if tau > plan.T_star * (1 + 1e-9):
        raise DomainError(f"interval length {tau:g} exceeds T_star={plan.T_star:g}")
    if dW is None:
        dW = brownian_increments(seed, np.arange(path_offset, path_offset + n_paths),
                                 grid.n_steps, grid.dt)
    x0 = m.x0 if x0 is None else x0
    start = (np.asarray(x0, dtype=float) * np.ones(n_paths)) if x_init is None else \
        np.full(n_paths, float(x_init))
    X = np.repeat(start[:, None], grid.n_steps + 1, axis=1)
    log: list[IterationRecord] = []
    converged = False
    for n in range(1, max_iter + 1):
        X_new = phi_apply(m, grid, X, dW, x0)
        norm, se = ensemble_norm(X_new - X, grid)
        rec = IterationRecord(n, norm, se)
        if log and log[-1].norm > 0:
            prev = log[-1]
            rec.ratio = norm / prev.norm
            rel = math.hypot(se / norm if norm > 0 else 0.0, prev.norm_se / prev.norm)
            rec.ratio_se = rec.ratio * rel
        log.append(rec)
        X = X_new
        if norm < tol:
            converged = True
            break
    if not converged and log[-1].ratio is not None and log[-1].ratio >= 1:
        raise NonConvergenceError(
            f"no contraction after {max_iter} iterations (last ratio {log[-1].ratio:.3g})")
    residual, _ = ensemble_norm(phi_apply(m, grid, X, dW, x0) - X, grid)
    return FixedPointResult(X, log, converged, grid, dW, residual)


@dataclass
class IntervalReport:
    index: int
    t_start: float
    t_end: float
    iterations: int
    converged: bool
    second_moment_end: float
    second_moment_se: float


@dataclass
class GlobalResult:
    times: np.ndarray
    ensemble: np.ndarray
    intervals: list[IntervalReport]
    plan: ContractionPlan
    pieces: list[FixedPointResult] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "L": self.plan.L,
            "T_star": self.plan.T_star,
            "n_intervals": self.plan.n_intervals,
            "c_target": self.plan.c_target,
            "c_formula": self.plan.formula,
            "intervals": [vars(r) for r in self.intervals],
        }


def solve_global(m: ModelSpec, t0: float, T: float, n_steps_per_interval: int, seed: int,
                 n_paths: int, tol: float, max_iter: int = 100,
                 c_target: float = C_TARGET) -> GlobalResult:
    """Chain fixed-point solves over ``[t0, T]`` in intervals no longer than ``T_star``.

    Each interval starts from the previous interval's terminal states and
    uses the next slice of each path's Brownian increments.  The terminal
    second moment of every interval is reported as the non-explosion check.
    """
    plan = contraction_plan(m, t0, T, c_target)
    n_int = plan.n_intervals
    tau = (T - t0) / n_int
    total = n_int * n_steps_per_interval
    dt = tau / n_steps_per_interval
    dW_all = brownian_increments(seed, np.arange(n_paths), total, dt)
    x_start = np.full(n_paths, float(m.x0))
    pieces, reports = [], []
    columns = [x_start[:, None]]
    times = [np.array([t0])]
    for k in range(n_int):
        a = t0 + k * tau
        b = T if k == n_int - 1 else t0 + (k + 1) * tau
        grid = PathGrid(a, b, n_steps_per_interval)
        sl = slice(k * n_steps_per_interval, (k + 1) * n_steps_per_interval)
        try:
            res = solve_fixed_point(m, grid, seed, n_paths, tol, max_iter, x0=x_start,
                                    dW=dW_all[:, sl], plan=plan)
        except NonConvergenceError as exc:
            raise NonConvergenceError(f"interval {k}: {exc}") from exc
        end = res.ensemble[:, -1]
        sq = end * end
        reports.append(IntervalReport(k, a, b, res.iterations, res.converged, float(sq.mean()),
                                      float(sq.std(ddof=1) / math.sqrt(n_paths))))
        pieces.append(res)
        columns.append(res.ensemble[:, 1:])
        times.append(grid.times[1:])
        x_start = end
    return GlobalResult(np.concatenate(times), np.concatenate(columns, axis=1), reports, plan,
                        pieces)
