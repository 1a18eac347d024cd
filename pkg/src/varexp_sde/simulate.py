"""Discrete path simulation with positivity projection and reproducible streams."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericalOverflowError, SchemeMismatchError
from .model import ModelSpec, is_gbm
from .streams import brownian_increments

trapezoid = getattr(np, "trapezoid", None) or np.trapz

X_FLOOR = 1e-12
X_CEILING = 1e300
SCHEMES = ("euler", "milstein", "gbm_exact")
CHUNK_SIZE = 2048


@dataclass(frozen=True)
class PathGrid:
    t0: float
    T: float
    n_steps: int

    def __post_init__(self):
        if not (self.T > self.t0 >= 0) or int(self.n_steps) < 1:
            raise DomainError(f"invalid grid t0={self.t0}, T={self.T}, n_steps={self.n_steps}")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @classmethod
    def from_dt(cls, t0: float, T: float, dt: float) -> "PathGrid":
        return cls(t0, T, max(1, int(round((T - t0) / dt))))


@dataclass
class Path:
    grid: PathGrid
    values: np.ndarray
    dW: np.ndarray
    projections: int
    seed: int
    path_index: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "X", "dW"])
        times = self.grid.times
        for k in range(self.grid.n_steps + 1):
            dw = repr(float(self.dW[k])) if k < self.grid.n_steps else ""
            w.writerow([repr(float(times[k])), repr(float(self.values[k])), dw])
        return buf.getvalue()


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    observable: str = ""

    def to_dict(self) -> dict:
        return {"observable": self.observable, "mean": self.mean, "std_error": self.std_error,
                "n_paths": self.n_paths, "seed": self.seed}


def estimate(samples, seed: int, name: str = "") -> McEstimate:
    s = np.asarray(samples, dtype=float)
    n = s.size
    se = float(np.std(s, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return McEstimate(float(np.mean(s)), se, n, seed, name)


def estimates_to_json(estimates: Sequence[McEstimate]) -> str:
    return json.dumps([e.to_dict() for e in estimates], indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class Observable:
    """A path functional ``fn(times, X, ...) -> one value per path``.

    With several coupled start values ``fn`` receives one ensemble per start.
    """

    name: str
    fn: Callable[..., np.ndarray]


def terminal(power: float = 1.0) -> Observable:
    if power == 1.0:
        return Observable("X(T)", lambda t, X: X[:, -1])
    return Observable(f"X(T)^{power:g}", lambda t, X: X[:, -1] ** power)


def value_at(k: int, power: float = 1.0) -> Observable:
    return Observable(f"X(t[{k}])^{power:g}", lambda t, X: X[:, k] ** power)


def running_sup_abs() -> Observable:
    return Observable("sup|X|", lambda t, X: np.max(np.abs(X), axis=1))


def integral_sq() -> Observable:
    """Trapezoid of ``X**2`` over the grid (per-path contribution to the squared norm)."""
    return Observable("int X^2 dt", lambda t, X: trapezoid(X ** 2, t, axis=1))


def constant(value: float = 1.0) -> Observable:
    return Observable(f"const {value:g}", lambda t, X: np.full(X.shape[0], float(value)))


def _check_scheme(m: ModelSpec, scheme: str):
    if scheme not in SCHEMES:
        raise SchemeMismatchError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme == "gbm_exact" and not is_gbm(m):
        raise SchemeMismatchError("gbm_exact needs p = q = 1 and constant mu, sigma")


def integrate(m: ModelSpec, grid: PathGrid, scheme: str, x_start, dW: np.ndarray,
              path_indices=None):
    """Run the recursion for a block of paths.

    Returns ``(values, projections)`` with ``values`` of shape
    ``(n_paths, n_steps + 1)``.  All operations are elementwise, so a path's
    trajectory is independent of the block it is simulated in.
    """
    _check_scheme(m, scheme)
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    n, n_steps = dW.shape
    if n_steps != grid.n_steps:
        raise DomainError(f"dW has {n_steps} steps, grid has {grid.n_steps}")
    dt = grid.dt
    t = grid.times
    X = np.empty((n, n_steps + 1))
    X[:, 0] = x_start
    proj = np.zeros(n, dtype=np.int64)
    mu_t = np.asarray(m.mu(t[:-1]), dtype=float) * np.ones(n_steps)
    sig_t = np.asarray(m.sigma(t[:-1]), dtype=float) * np.ones(n_steps)
    if scheme == "gbm_exact":
        mu, sig = m.mu.constant, m.sigma.constant
        growth = np.exp((mu - 0.5 * sig * sig) * dt + sig * dW)
    x = X[:, 0].copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            if scheme == "gbm_exact":
                x_new = x * growth[:, k]
            else:
                b = sig_t[k] * m.q.power(x)
                x_new = x + mu_t[k] * m.p.power(x) * dt + b * dW[:, k]
                if scheme == "milstein":
                    x_new += 0.5 * b * sig_t[k] * m.q.power_dx(x) * (dW[:, k] ** 2 - dt)
            bad = ~(x_new < X_CEILING)
            if np.any(bad):
                row = int(np.flatnonzero(bad)[0])
                pid = row if path_indices is None else int(np.asarray(path_indices)[row])
                raise NumericalOverflowError(
                    f"path {pid} exceeded {X_CEILING:g} at t={t[k + 1]:g}")
            low = x_new <= X_FLOOR
            if np.any(low):
                x_new[low] = X_FLOOR
                proj += low
            X[:, k + 1] = x_new
            x = x_new
    return X, proj


def simulate_path(m: ModelSpec, grid: PathGrid, scheme: str = "euler", seed: int = 0,
                  path_index: int = 0, x0: float | None = None) -> Path:
    _check_scheme(m, scheme)
    dW = brownian_increments(seed, [path_index], grid.n_steps, grid.dt)
    X, proj = integrate(m, grid, scheme, m.x0 if x0 is None else x0, dW, [path_index])
    return Path(grid, X[0], dW[0], int(proj[0]), seed, path_index)


@dataclass
class BatchResult:
    names: list[str]
    samples: np.ndarray  # (n_paths, n_observables), rows in path_index order
    projections: np.ndarray
    seed: int

    def estimates(self) -> list[McEstimate]:
        return [estimate(self.samples[:, j], self.seed, name) for j, name in enumerate(self.names)]

    @property
    def total_projections(self) -> int:
        return int(self.projections.sum())


def run_paths(m: ModelSpec, grid: PathGrid, scheme: str, seed: int, n_paths: int,
              observables: Sequence[Observable], starts: Sequence[float] | None = None,
              threads: int = 1, chunk_size: int = CHUNK_SIZE) -> BatchResult:
    """Simulate ``n_paths`` paths in fixed-size chunks and evaluate observables.

    ``starts`` lists start values sharing each path's Brownian increments
    (coupled solutions); observables then receive one ensemble per start.
    Chunk boundaries do not depend on ``threads``, and each chunk writes its
    own rows, so output is identical for any worker count.
    """
    _check_scheme(m, scheme)
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    starts = [m.x0] if starts is None else list(starts)
    for s in starts:
        if not s > 0:
            raise DomainError(f"start value must be positive, got {s}")
    samples = np.empty((n_paths, len(observables)))
    proj = np.zeros(n_paths, dtype=np.int64)
    times = grid.times
    bounds = [(lo, min(lo + chunk_size, n_paths)) for lo in range(0, n_paths, chunk_size)]

    def work(bound):
        lo, hi = bound
        idx = np.arange(lo, hi)
        dW = brownian_increments(seed, idx, grid.n_steps, grid.dt)
        ensembles = []
        for s in starts:
            X, pr = integrate(m, grid, scheme, s, dW, idx)
            ensembles.append(X)
            proj[lo:hi] += pr
        for j, obs in enumerate(observables):
            samples[lo:hi, j] = obs.fn(times, *ensembles)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, bounds))
    else:
        for b in bounds:
            work(b)
    return BatchResult([o.name for o in observables], samples, proj, seed)


def simulate_batch(m: ModelSpec, grid: PathGrid, scheme: str, seed: int, n_paths: int,
                   observables: Sequence[Observable], threads: int = 1) -> list[McEstimate]:
    if n_paths < 2:
        raise DomainError("simulate_batch needs at least 2 paths")
    return run_paths(m, grid, scheme, seed, n_paths, observables, threads=threads).estimates()


def coupled_terminal_gap(m: ModelSpec, grid: PathGrid, seed: int, n_paths: int,
                         scheme_a: str = "euler", scheme_b: str = "gbm_exact",
                         threads: int = 1, chunk_size: int = CHUNK_SIZE) -> np.ndarray:
    """Per-path ``|X_a(T) - X_b(T)|`` for two schemes driven by the same increments."""
    _check_scheme(m, scheme_a)
    _check_scheme(m, scheme_b)
    out = np.empty(n_paths)
    bounds = [(lo, min(lo + chunk_size, n_paths)) for lo in range(0, n_paths, chunk_size)]

    def work(bound):
        lo, hi = bound
        idx = np.arange(lo, hi)
        dW = brownian_increments(seed, idx, grid.n_steps, grid.dt)
        Xa, _ = integrate(m, grid, scheme_a, m.x0, dW, idx)
        end_a = Xa[:, -1].copy()
        del Xa
        Xb, _ = integrate(m, grid, scheme_b, m.x0, dW, idx)
        out[lo:hi] = np.abs(end_a - Xb[:, -1])

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, bounds))
    else:
        for b in bounds:
            work(b)
    return out
