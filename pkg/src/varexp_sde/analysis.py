"""Monte Carlo checks of the moment, asymptotic-growth and stability bounds."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model import ModelSpec, is_gbm
from .picard import state_lipschitz
from .simulate import Observable, PathGrid, run_paths

VACUOUS = 1e300


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 700 else math.inf


@dataclass(frozen=True)
class MomentBound:
    """m-th moment bound ``(3^{m-1} E[x0^2] + (t - t0)(A + B)) exp(t (A + B))``."""

    m: float
    K: float
    mu_plus: float
    sigma_plus: float
    x0_term: float
    t0: float = 0.0

    def A(self, t: float) -> float:
        m = self.m
        return 6 ** (m - 1) * self.mu_plus ** m * (t - self.t0) ** (m - 1) * self.K ** m

    def B(self, t: float) -> float:
        m = self.m
        return (6 ** (m - 1) * self.sigma_plus ** m * (m * (m - 1) / 2) ** (m / 2)
                * (t - self.t0) ** ((m - 2) / 2) * self.K ** m)

    def bound(self, t: float) -> float:
        ab = self.A(t) + self.B(t)
        base = 3 ** (self.m - 1) * self.x0_term + (t - self.t0) * ab
        val = base * _safe_exp(t * ab)
        return val if val <= VACUOUS else math.inf


def moment_bound(model: ModelSpec, m: float, use_x0m: bool = False) -> MomentBound:
    if m < 2:
        raise DomainError("moment order must be at least 2")
    x0_term = model.x0 ** m if use_x0m else model.x0 ** 2
    return MomentBound(m, model.K, model.mu_plus, model.sigma_plus, x0_term, model.t0)


def bdg_constant(m: float) -> float:
    """``(m (m - 1) / 2) ** (m / 2)``, the moment-inequality constant."""
    return (m * (m - 1) / 2) ** (m / 2)


@dataclass(frozen=True)
class StabilityBound:
    m: float
    L: float
    mu_plus: float
    sigma_plus: float
    T: float

    @property
    def C_m(self) -> float:
        return bdg_constant(self.m)

    def L_bar(self, t: float | None = None) -> float:
        t = self.T if t is None else t
        m = self.m
        return 3 ** (m - 1) * self.L ** m * (self.mu_plus ** m * t ** (m - 1)
                                             + self.C_m * self.sigma_plus ** m * t ** ((m - 2) / 2))

    @property
    def factor(self) -> float:
        return 3 ** (self.m - 1) * _safe_exp(self.T * self.L_bar())


def stability_bound(model: ModelSpec, m: float, T: float | None = None,
                    L: float | None = None) -> StabilityBound:
    if m < 2:
        raise DomainError("stability power must be at least 2")
    L = state_lipschitz(model) if L is None else L
    T = model.T - model.t0 if T is None else T
    return StabilityBound(m, L, model.mu_plus, model.sigma_plus, T)


@dataclass(frozen=True)
class AsymptoticBound:
    K: float
    mu_plus: float
    sigma_plus: float

    @property
    def K_hat(self) -> float:
        return 4 * max(self.K ** 2 * self.sigma_plus ** 2, self.K * self.mu_plus)


def asymptotic_bound(model: ModelSpec) -> AsymptoticBound:
    return AsymptoticBound(model.K, model.mu_plus, model.sigma_plus)


def _checkpoint_indices(n_steps: int, n_checkpoints: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, n_steps, n_checkpoints + 1)).astype(int))


@dataclass
class MomentReport:
    m: float
    checkpoints: np.ndarray
    empirical: np.ndarray
    std_error: np.ndarray
    bound: np.ndarray
    checks: np.ndarray
    seed: int
    n_paths: int
    use_x0m: bool = False
    projections: int = 0

    @property
    def passed(self) -> bool:
        return bool(np.all(self.checks))

    @property
    def vacuous(self) -> bool:
        return bool(np.any(np.isinf(self.bound)))

    def to_dict(self) -> dict:
        return {
            "theorem": "moment",
            "parameters": {"m": self.m, "seed": self.seed, "n_paths": self.n_paths,
                           "x0_term": "E[x0^m]" if self.use_x0m else "E[x0^2]"},
            "checkpoints": self.checkpoints.tolist(),
            "empirical": self.empirical.tolist(),
            "std_error": self.std_error.tolist(),
            "bound": [b if math.isfinite(b) else "vacuous" for b in self.bound.tolist()],
            "bound_vacuous": self.vacuous,
            "projections": self.projections,
            "pass": self.passed,
        }

    def to_csv(self) -> str:
        return _series_csv(self.checkpoints, self.empirical, self.std_error, self.bound)


def _series_csv(t, emp, se, bound) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "empirical", "SE", "bound"])
    for row in zip(t, emp, se, bound):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def verify_moment_bound(model: ModelSpec, m: float, grid: PathGrid, seed: int, n_paths: int,
                        n_checkpoints: int = 10, scheme: str = "euler",
                        use_x0m: bool = False, threads: int = 1) -> MomentReport:
    """Compare ``E[X^m(t_k)]`` at evenly spaced checkpoints with the moment bound.

    A checkpoint passes when ``empirical - 3 SE <= bound``; an overflowing
    bound is reported as vacuous and passes trivially.
    """
    mb = moment_bound(model, m, use_x0m)
    idx = _checkpoint_indices(grid.n_steps, n_checkpoints)
    obs = [Observable(f"X(t[{k}])^{m:g}", (lambda k: lambda t, X: X[:, k] ** m)(k)) for k in idx]
    res = run_paths(model, grid, scheme, seed, n_paths, obs, threads=threads)
    est = res.estimates()
    t = grid.times[idx]
    emp = np.array([e.mean for e in est])
    se = np.array([e.std_error for e in est])
    bound = np.array([mb.bound(tk) for tk in t])
    checks = emp - 3 * se <= bound
    return MomentReport(m, t, emp, se, bound, checks, seed, n_paths, use_x0m,
                        res.total_projections)


@dataclass
class AsymptoticReport:
    T_long: float
    K_hat: float
    samples: np.ndarray = field(repr=False)
    quantile: float
    seed: int
    terminal_rates: np.ndarray | None = field(repr=False, default=None)
    drift_limit: float | None = None

    @property
    def terminal_median(self) -> float | None:
        """Median of ``log X(T_long) / T_long``, the pathwise growth-rate estimate."""
        if self.terminal_rates is None:
            return None
        return float(np.median(self.terminal_rates))

    @property
    def quantiles(self) -> dict[str, float]:
        q = np.quantile(self.samples, [0.01, 0.5, 0.99])
        return {"q01": float(q[0]), "median": float(q[1]), "q99": float(q[2])}

    @property
    def statistic(self) -> float:
        return float(np.quantile(self.samples, self.quantile))

    @property
    def passed(self) -> bool:
        return self.statistic <= self.K_hat

    def to_dict(self) -> dict:
        return {
            "theorem": "asymptotic",
            "parameters": {"T_long": self.T_long, "window_start": self.T_long / 2,
                           "quantile": self.quantile, "seed": self.seed,
                           "n_paths": int(self.samples.size)},
            "quantiles": self.quantiles,
            "statistic": self.statistic,
            "K_hat": self.K_hat,
            "terminal_rate_median": self.terminal_median,
            "gbm_rate_limit": self.drift_limit,
            "pass": self.passed,
        }


def verify_asymptotic(model: ModelSpec, T_long: float, grid: PathGrid, seed: int, n_paths: int,
                      scheme: str = "euler", quantile: float = 0.99,
                      threads: int = 1) -> AsymptoticReport:
    """Per-path ``sup_{t >= T_long/2} log X(t) / t`` against ``K_hat``.

    Also records ``log X(T_long) / T_long`` per path.  For constant-coefficient
    GBM its median estimates the almost-sure limit ``mu - sigma^2 / 2``,
    which is stored as ``drift_limit``; the sup over the window sits above
    that limit by an O(sigma / sqrt(T_long)) margin.
    """
    if T_long < 10:
        raise DomainError("asymptotic check needs T_long >= 10")
    if abs(grid.T - T_long) > 1e-9 * T_long or grid.t0 != model.t0:
        raise DomainError("grid must span [t0, T_long]")
    m_long = model if model.T >= T_long else model.with_horizon(T_long)
    t = grid.times
    window = t >= T_long / 2

    def sup_rate(times, X):
        return np.max(np.log(X[:, window]) / times[window], axis=1)

    def end_rate(times, X):
        return np.log(X[:, -1]) / (times[-1] - times[0])

    res = run_paths(m_long, grid, scheme, seed, n_paths,
                    [Observable("sup log X / t", sup_rate), Observable("log X(T) / T", end_rate)],
                    threads=threads)
    limit = None
    if is_gbm(m_long):
        limit = m_long.mu.constant - 0.5 * m_long.sigma.constant ** 2
    return AsymptoticReport(T_long, asymptotic_bound(m_long).K_hat, res.samples[:, 0],
                            quantile, seed, res.samples[:, 1], limit)


@dataclass
class StabilityReport:
    m: float
    xi: float
    eta: float
    empirical: float
    std_error: float
    factor: float
    L_bar: float
    empirical_half: float | None
    rate_exponent: float | None
    seed: int
    n_paths: int

    @property
    def bound(self) -> float:
        return self.factor * abs(self.xi - self.eta) ** self.m

    @property
    def ratio(self) -> float:
        return self.empirical / self.bound if self.bound > 0 else float("nan")

    @property
    def passed(self) -> bool:
        return self.empirical - 3 * self.std_error <= self.bound

    @property
    def rate_ok(self) -> bool | None:
        if self.rate_exponent is None:
            return None
        return abs(self.rate_exponent - self.m) <= 0.3

    def to_dict(self) -> dict:
        return {
            "theorem": "stability",
            "parameters": {"m": self.m, "xi": self.xi, "eta": self.eta, "seed": self.seed,
                           "n_paths": self.n_paths},
            "empirical": self.empirical,
            "std_error": self.std_error,
            "bound": self.bound,
            "factor": self.factor,
            "L_bar": self.L_bar,
            "ratio": self.ratio,
            "empirical_half_gap": self.empirical_half,
            "rate_exponent": self.rate_exponent,
            "rate_ok": self.rate_ok,
            "pass": self.passed,
        }


def coupled_sup_gap(model: ModelSpec, m: float, xi: float, eta: float, grid: PathGrid,
                    seed: int, n_paths: int, scheme: str = "euler", threads: int = 1):
    """Per-path ``max_k |X_xi(t_k) - X_eta(t_k)|^m`` on shared increments."""
    obs = Observable("sup|dX|^m", lambda t, A, B: np.max(np.abs(A - B), axis=1) ** m)
    res = run_paths(model, grid, scheme, seed, n_paths, [obs], starts=[xi, eta], threads=threads)
    return res.samples[:, 0]


def verify_stability(model: ModelSpec, m: float, xi: float, eta: float, grid: PathGrid,
                     seed: int, n_paths: int, scheme: str = "euler",
                     threads: int = 1) -> StabilityReport:
    """Coupled-start check of ``E sup |X_xi - X_eta|^m <= 3^{m-1} e^{T Lbar} |xi - eta|^m``.

    Also reruns with the gap halved and reports the fitted exponent
    ``log2(E_full / E_half)``, which should be close to ``m``.
    """
    if not (xi > 0 and eta > 0):
        raise DomainError("stability starts must be positive")
    sb = stability_bound(model, m, T=grid.T - grid.t0)
    s = coupled_sup_gap(model, m, xi, eta, grid, seed, n_paths, scheme, threads)
    emp = float(np.mean(s))
    se = float(np.std(s, ddof=1) / math.sqrt(n_paths))
    emp_half = rate = None
    if xi != eta:
        s2 = coupled_sup_gap(model, m, xi, xi + (eta - xi) / 2, grid, seed, n_paths, scheme,
                             threads)
        emp_half = float(np.mean(s2))
        if emp > 0 and emp_half > 0:
            rate = math.log2(emp / emp_half)
    return StabilityReport(m, xi, eta, emp, se, sb.factor, sb.L_bar(), emp_half, rate, seed,
                           n_paths)
