"""The variable-exponent SDE ``dX = mu(t) X**p(X) dt + sigma(t) X**q(X) dW``."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .exponents import (ExponentFunction, GridSpec, GrowthCertificate, growth_certificate,
                        validate_class_s)

N_COEFF_SAMPLES = 4096
FELLER_TOL = 1e-6


@dataclass(frozen=True)
class CoefficientFunction:
    """Deterministic continuous ``mu(t)`` or ``sigma(t)`` with certified bounds."""

    f: Callable[[np.ndarray], np.ndarray]
    f_minus: float
    f_plus: float
    name: str = "custom"
    constant: float | None = None

    def __call__(self, t):
        return self.f(t)


def certify_coefficient(f, T: float, declared: tuple[float, float] | None = None,
                        name: str = "custom", constant: float | None = None,
                        t0: float = 0.0, n: int = N_COEFF_SAMPLES) -> CoefficientFunction:
    """Sample ``f`` on ``[t0, T]`` and combine with any declared analytic bounds.

    The tighter of the sampled and declared bounds is kept; declared bounds
    that the samples contradict are rejected.
    """
    t = np.linspace(t0, T, max(n, N_COEFF_SAMPLES))
    v = np.asarray(f(t), dtype=float) * np.ones_like(t)
    if not np.all(np.isfinite(v)):
        raise DomainError(f"coefficient {name} is not finite on [{t0}, {T}]")
    lo, hi = float(v.min()), float(v.max())
    if declared is not None:
        dlo, dhi = declared
        if dlo > lo * (1 + 1e-12) + 1e-300 or dhi < hi * (1 - 1e-12) - 1e-300:
            raise DomainError(f"declared bounds {declared} of {name} contradict sampled [{lo}, {hi}]")
        lo, hi = max(lo, dlo), min(hi, dhi)
    return CoefficientFunction(f, lo, hi, name, constant)


def constant_coefficient(value: float, T: float = 1.0) -> CoefficientFunction:
    v = float(value)
    return CoefficientFunction(lambda t: np.full(np.shape(t), v), v, v, f"const:{v:g}", v)


def parse_coefficient(spec: str, T: float, t0: float = 0.0,
                      declared: tuple[float, float] | None = None) -> CoefficientFunction:
    """Builtin coefficients: ``const:v``, ``linear:a,b`` (a + b t), ``sine:a,b,w`` (a + b sin wt)."""
    s = spec.strip()
    kind, _, args = s.partition(":")
    try:
        vals = [float(v) for v in args.split(",")] if args else []
    except ValueError as exc:
        raise DomainError(f"bad coefficient {spec!r}") from exc
    if kind == "const" and len(vals) == 1:
        c = constant_coefficient(vals[0], T)
        if declared is not None:
            c = certify_coefficient(c.f, T, declared, c.name, c.constant, t0)
        return c
    if kind == "linear" and len(vals) == 2:
        a, b = vals
        return certify_coefficient(lambda t: a + b * np.asarray(t, dtype=float), T, declared,
                                   s, None, t0)
    if kind == "sine" and len(vals) == 3:
        a, b, w = vals
        analytic = (a - abs(b), a + abs(b))
        if declared is not None:
            analytic = (max(analytic[0], declared[0]), min(analytic[1], declared[1]))
        return certify_coefficient(lambda t: a + b * np.sin(w * np.asarray(t, dtype=float)), T,
                                   analytic, s, None, t0)
    raise DomainError(f"unknown coefficient {spec!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Full model: exponents, coefficient functions, start value and horizon.

    Construction validates both exponents against class S and attaches their
    growth certificates.  ``allow_degenerate`` admits zero coefficients
    (``sigma = 0`` ODE limits, near-frozen diagnostics); condition (D)
    itself needs strictly positive bounds.
    """

    p: ExponentFunction
    q: ExponentFunction
    mu: CoefficientFunction
    sigma: CoefficientFunction
    x0: float
    T: float
    t0: float = 0.0
    allow_degenerate: bool = False
    grid: GridSpec = field(default_factory=GridSpec)
    cert_p: GrowthCertificate = field(init=False, repr=False)
    cert_q: GrowthCertificate = field(init=False, repr=False)

    def __post_init__(self):
        if not self.x0 > 0:
            raise DomainError(f"x0 must be positive, got {self.x0}")
        if not self.T > self.t0 >= 0:
            raise DomainError(f"need 0 <= t0 < T, got t0={self.t0}, T={self.T}")
        for name, coef in (("mu", self.mu), ("sigma", self.sigma)):
            if coef.f_minus < 0 or not np.isfinite(coef.f_plus):
                raise DomainError(f"{name} bounds [{coef.f_minus}, {coef.f_plus}] invalid")
            if coef.f_minus == 0 and not self.allow_degenerate:
                raise DomainError(f"{name} must be bounded away from 0 (condition D)")
        for name, h in (("p", self.p), ("q", self.q)):
            report = validate_class_s(h, self.grid)
            if not report.passed:
                raise DomainError(f"exponent {name}={h.name} is not in class S: "
                                  f"failed {', '.join(report.failed())}")
        object.__setattr__(self, "cert_p", growth_certificate(self.p, self.grid))
        object.__setattr__(self, "cert_q", growth_certificate(self.q, self.grid))

    @property
    def K(self) -> float:
        return max(self.cert_p.K, self.cert_q.K)

    @property
    def mu_plus(self) -> float:
        return self.mu.f_plus

    @property
    def sigma_plus(self) -> float:
        return self.sigma.f_plus

    @property
    def mu_plus_bar(self) -> float:
        return max(self.mu.f_minus, self.mu.f_plus)

    @property
    def sigma_plus_bar(self) -> float:
        return max(self.sigma.f_minus, self.sigma.f_plus)

    def with_x0(self, x0: float) -> "ModelSpec":
        return ModelSpec(self.p, self.q, self.mu, self.sigma, x0, self.T, self.t0,
                         self.allow_degenerate, self.grid)

    def with_horizon(self, T: float, t0: float | None = None) -> "ModelSpec":
        return ModelSpec(self.p, self.q, self.mu, self.sigma, self.x0, T,
                         self.t0 if t0 is None else t0, self.allow_degenerate, self.grid)


def is_gbm(m: ModelSpec) -> bool:
    return (m.p.constant == 1.0 and m.q.constant == 1.0
            and m.mu.constant is not None and m.sigma.constant is not None)


def is_cev(m: ModelSpec) -> bool:
    return (m.p.constant == 1.0 and m.q.constant is not None
            and m.mu.constant is not None and m.sigma.constant is not None)


def _check_args(m: ModelSpec, t, x):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("state must be positive")
    span = 1e-12 * max(1.0, m.T)
    if np.any(t < m.t0 - span) or np.any(t > m.T + span):
        raise DomainError(f"time outside [{m.t0}, {m.T}]")
    return t, x


def drift(m: ModelSpec, t, x):
    """``mu(t) x**p(x)``."""
    t, x = _check_args(m, t, x)
    return m.mu(t) * m.p.power(x)


def diffusion(m: ModelSpec, t, x):
    """``sigma(t) x**q(x)``."""
    t, x = _check_args(m, t, x)
    return m.sigma(t) * m.q.power(x)


def diffusion_dx(m: ModelSpec, t, x):
    """State derivative of the diffusion coefficient (used by Milstein)."""
    t, x = _check_args(m, t, x)
    return m.sigma(t) * m.q.power_dx(x)


@dataclass
class FellerReport:
    t: float
    x: np.ndarray
    values: np.ndarray
    lower_bound: np.ndarray
    tol: float
    tail_nonnegative: bool
    trending_to_zero: bool

    @property
    def verdict(self) -> str:
        if self.tail_nonnegative and self.trending_to_zero:
            return "non-attainable"
        return "inconclusive"

    @property
    def passed(self) -> bool:
        return self.verdict == "non-attainable"

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "x": self.x.tolist(),
            "T": self.values.tolist(),
            "T_lower_bound": self.lower_bound.tolist(),
            "tol": self.tol,
            "tail_nonnegative": self.tail_nonnegative,
            "trending_to_zero": self.trending_to_zero,
            "verdict": self.verdict,
            "pass": self.passed,
        }


def feller_diagnostic(m: ModelSpec, t: float = 0.0, x_grid=None,
                      tol: float = FELLER_TOL) -> FellerReport:
    """Boundary test at 0: ``mu x**p - sigma**2/2 * d/dx x**(2q)`` as ``x -> 0+``.

    Besides the exact value the report carries the cruder lower bound that
    replaces ``|q'|`` by M0 and ``q`` by ``q_plus``.
    """
    if x_grid is None:
        x_grid = np.logspace(-2, -8, 7)
    x = np.asarray(x_grid, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("Feller grid must be positive")
    if x.size > 1 and np.any(np.diff(x) >= 0):
        raise DomainError("Feller grid must be strictly decreasing")
    _check_args(m, t, x)
    mu_t = float(m.mu(np.asarray(t)))
    sig_t = float(m.sigma(np.asarray(t)))
    q = m.q
    qx = np.asarray(q.h(x), dtype=float)
    logx = np.log(x)
    x2q = np.exp(2 * qx * logx)
    d_x2q = x2q * (2 * np.asarray(q.h_prime(x)) * logx + 2 * qx / x)
    values = mu_t * m.p.power(x) - 0.5 * sig_t ** 2 * d_x2q
    lower = (m.mu.f_minus * m.p.power(x)
             - m.sigma.f_plus ** 2 * (q.M0 * x2q * np.abs(logx) + x2q / x * q.h_plus))

    tail = values[len(values) // 2:]
    tail_nonneg = bool(np.all(tail >= -tol))
    a = np.abs(tail)
    trending = bool(np.all(np.diff(a) <= 1e-15 + 1e-12 * a[:-1]) and a[-1] <= max(tol, a[0]))
    return FellerReport(float(t), x, values, lower, tol, tail_nonneg, trending)
