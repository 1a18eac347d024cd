"""Variable-exponent functions and their class-S certificates.

An exponent function ``h`` maps ``(0, inf)`` into ``[1, inf)``.  The model
coefficients are of the form ``x ** h(x)``; everything downstream (linear
growth, Lipschitz continuity, boundary behaviour at 0) depends on ``h``
satisfying three hypotheses:

* (h1) ``1 <= inf h`` and ``sup h < inf``;
* (h2) ``h(x) -> 1`` as ``x -> inf`` with ``(h(x) - 1) log x`` bounded;
* (h3) ``|h'| <= M0`` on ``(0, delta]`` and ``|h'| <= C0 x**-(1 + alpha)``
  beyond ``delta``, with ``sup h < 1 + alpha``.

They are certified here on a dense logarithmic grid, not proven.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CertificateError, DomainError

SAFETY_FACTOR = 1.01
R_INF = 10.0
H2_LIMIT_TOL = 1e-3
OVERFLOW_GUARD = 1e100

ArrayFunc = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    """Logarithmic sampling plan on ``[lo, hi]``."""

    lo: float = 1e-8
    hi: float = 1e8
    n: int = 10_000

    def __post_init__(self):
        if not (0 < self.lo < self.hi) or self.n < 2:
            raise DomainError(f"invalid grid [{self.lo}, {self.hi}] with {self.n} points")

    def points(self) -> np.ndarray:
        return np.logspace(np.log10(self.lo), np.log10(self.hi), self.n)


@dataclass(frozen=True)
class ExponentFunction:
    """A candidate exponent ``h`` with its exact derivative and (h3) constants.

    ``h`` and ``h_prime`` must accept numpy arrays.  ``constant`` is set for
    exponents that do not depend on the state; it lets the simulators skip
    the ``exp(h log x)`` evaluation.
    """

    h: ArrayFunc
    h_prime: ArrayFunc
    h_minus: float
    h_plus: float
    delta: float
    M0: float
    C0: float
    alpha: float
    name: str = "custom"
    constant: float | None = None

    def __call__(self, x):
        return self.h(x)

    def power(self, x):
        """``x ** h(x)``."""
        x = np.asarray(x, dtype=float)
        if self.constant == 1.0:
            return x.copy()
        if self.constant is not None:
            return x ** self.constant
        return np.exp(self.h(x) * np.log(x))

    def power_dx(self, x):
        """Derivative of ``x ** h(x)``: ``x**h * (h' log x + h / x)``."""
        x = np.asarray(x, dtype=float)
        if self.constant is not None:
            c = self.constant
            return c * x ** (c - 1.0)
        hx = self.h(x)
        logx = np.log(x)
        return np.exp(hx * logx) * (self.h_prime(x) * logx + hx / x)


def constant_exponent(c: float, delta=1.0, M0=1.0, C0=1.0, alpha=1.0) -> ExponentFunction:
    c = float(c)

    def h(x):
        return np.full(np.shape(x), c)

    def hp(x):
        return np.zeros(np.shape(x))

    return ExponentFunction(h, hp, c, c, delta, M0, C0, alpha,
                            name=f"constant:{c:g}", constant=c)


def rational_exponent(a: float, k: float) -> ExponentFunction:
    """``h(x) = 1 + a / (1 + x**k)`` with ``a > 0``, ``k >= 1``.

    The (h3) constants are the analytic ones: on ``(0, 1]`` the derivative is
    bounded by ``a k``; beyond 1 it is bounded by ``a k x**-(k + 1)``.
    """
    a = float(a)
    k = float(k)
    if a <= 0 or k < 1:
        raise DomainError(f"rational exponent needs a > 0 and k >= 1, got a={a}, k={k}")

    def h(x):
        return 1.0 + a / (1.0 + np.power(x, k))

    def hp(x):
        xk = np.power(x, k)
        return -a * k * np.power(x, k - 1.0) / (1.0 + xk) ** 2

    return ExponentFunction(h, hp, 1.0, 1.0 + a, delta=1.0, M0=a * k, C0=a * k,
                            alpha=k, name=f"rational:{a:g}/1+x^{k:g}")


def remark1_exponent() -> ExponentFunction:
    """``h(x) = 1 + 0.5 / (1 + x)`` with delta=1, M0=0.5, C0=1, alpha=1."""

    def h(x):
        return 1.0 + 0.5 / (1.0 + np.asarray(x, dtype=float))

    def hp(x):
        return -0.5 / (1.0 + np.asarray(x, dtype=float)) ** 2

    return ExponentFunction(h, hp, 1.0, 1.5, delta=1.0, M0=0.5, C0=1.0, alpha=1.0,
                            name="remark1")


_RATIONAL = re.compile(r"^rational:\s*([0-9.eE+-]+)\s*/\s*<?\s*1\s*\+\s*x\s*\^\s*([0-9.eE+-]+)\s*>?\s*$")


def parse_exponent(spec: str) -> ExponentFunction:
    """Build a builtin exponent from its config name.

    Accepted forms: ``remark1``, ``constant:<c>``, ``rational:<a>/<1+x^k>``
    (angle brackets optional).  Anything else is rejected.
    """
    s = spec.strip()
    if s == "remark1":
        return remark1_exponent()
    if s.startswith("constant:"):
        try:
            return constant_exponent(float(s.split(":", 1)[1]))
        except ValueError as exc:
            raise DomainError(f"bad constant exponent {spec!r}") from exc
    m = _RATIONAL.match(s)
    if m:
        return rational_exponent(float(m.group(1)), float(m.group(2)))
    raise DomainError(f"unknown exponent function {spec!r}")


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    detail: str = ""
    witness_x: float | None = None
    certified: str = "grid"


@dataclass
class ValidationReport:
    exponent: str
    checks: dict[str, HypothesisCheck] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "pass": self.passed,
            "checks": {
                name: {"pass": c.passed, "detail": c.detail, "witness_x": c.witness_x,
                       "certified": c.certified}
                for name, c in self.checks.items()
            },
        }


def _first(x, mask):
    idx = np.flatnonzero(mask)
    return float(x[idx[0]]) if idx.size else None


def _h2_tail(f: ExponentFunction, x: np.ndarray, hx: np.ndarray):
    """Return ``(limit_ok, bounded_ok, top_mean, witness)`` for hypothesis (h2)."""
    top = x >= x[-1] / 10.0
    top_mean = float(np.mean(np.abs(hx[top] - 1.0)))
    limit_ok = top_mean < H2_LIMIT_TOL

    tail = x > R_INF
    g = (hx - 1.0) * np.log(x)
    # bounded on the grid: the last decade may not climb above what came before it
    earlier = tail & ~top
    bounded_ok = True
    witness = None
    if np.any(earlier) and np.any(top & tail):
        ref = float(np.max(g[earlier]))
        top_g = g[top & tail]
        slack = 1e-9 + 1e-9 * abs(ref)
        if np.max(top_g) > ref + slack:
            bounded_ok = False
            witness = float(x[top & tail][np.argmax(top_g)])
    return limit_ok, bounded_ok, top_mean, witness


def validate_class_s(f: ExponentFunction, grid: GridSpec | None = None) -> ValidationReport:
    """Check (h1)-(h3) and the supplied derivative on a logarithmic grid.

    Raises DomainError if ``h`` is non-finite or below 1 at a grid point.
    """
    grid = grid or GridSpec()
    if grid.lo > 1e-8 or grid.hi < 1e8 or grid.n < 10_000:
        raise DomainError("class-S grid must cover [1e-8, 1e8] with at least 1e4 points")
    x = grid.points()
    hx = np.asarray(f.h(x), dtype=float)
    bad = ~np.isfinite(hx) | (hx < 1.0)
    if np.any(bad):
        raise DomainError(f"{f.name}: h(x) non-finite or below 1 at x={_first(x, bad):g}")

    report = ValidationReport(f.name)
    eps = 1e-12

    # (h1)
    lo_bad = hx < f.h_minus - eps * max(1.0, abs(f.h_minus))
    hi_bad = hx > f.h_plus + eps * max(1.0, abs(f.h_plus))
    if f.h_minus < 1.0:
        report.checks["h1"] = HypothesisCheck("h1", False, f"h_minus={f.h_minus} < 1")
    elif np.any(lo_bad):
        report.checks["h1"] = HypothesisCheck(
            "h1", False, "h(x) < h_minus", _first(x, lo_bad))
    elif np.any(hi_bad) or not np.isfinite(f.h_plus):
        report.checks["h1"] = HypothesisCheck(
            "h1", False, "h(x) > h_plus", _first(x, hi_bad))
    else:
        report.checks["h1"] = HypothesisCheck(
            "h1", True, f"{hx.min():.6g} <= h <= {hx.max():.6g} within [{f.h_minus}, {f.h_plus}]")

    # (h2)
    limit_ok, bounded_ok, top_mean, witness = _h2_tail(f, x, hx)
    if not limit_ok:
        report.checks["h2"] = HypothesisCheck(
            "h2", False, f"mean |h-1| on the top decade is {top_mean:.3g} >= {H2_LIMIT_TOL}",
            float(x[-1]), certified="grid-certified")
    elif not bounded_ok:
        report.checks["h2"] = HypothesisCheck(
            "h2", False, "(h-1)log x still growing on the top decade", witness,
            certified="grid-certified")
    else:
        report.checks["h2"] = HypothesisCheck(
            "h2", True, f"mean |h-1| on the top decade {top_mean:.3g}",
            certified="grid-certified")

    # (h3)
    hp = np.abs(np.asarray(f.h_prime(x), dtype=float))
    near = x <= f.delta
    far = ~near
    near_bad = near & (hp > f.M0 * (1 + eps))
    far_bound = f.C0 * np.exp(-(1.0 + f.alpha) * np.log(x))
    far_bad = far & (hp > far_bound * (1 + eps) + 1e-300)
    if not f.h_plus < 1.0 + f.alpha:
        report.checks["h3"] = HypothesisCheck(
            "h3", False, f"h_plus={f.h_plus} not < 1 + alpha={1 + f.alpha}")
    elif np.any(near_bad):
        report.checks["h3"] = HypothesisCheck(
            "h3", False, f"|h'(x)| > M0={f.M0} on (0, delta]", _first(x, near_bad))
    elif np.any(far_bad):
        report.checks["h3"] = HypothesisCheck(
            "h3", False, f"|h'(x)| > C0 x^-(1+alpha) beyond delta", _first(x, far_bad))
    else:
        report.checks["h3"] = HypothesisCheck("h3", True, "derivative bounds hold")

    report.checks["h_prime"] = _check_derivative(f, x)
    return report


def _check_derivative(f: ExponentFunction, x: np.ndarray, rel_step=1e-4, rtol=1e-6):
    # tolerance = rtol * |h'| plus the central-difference roundoff bound
    step = rel_step * x
    fd = (np.asarray(f.h(x + step)) - np.asarray(f.h(x - step))) / (2 * step)
    hp = np.asarray(f.h_prime(x), dtype=float)
    hx = np.abs(np.asarray(f.h(x), dtype=float))
    roundoff = 10 * np.finfo(float).eps * hx / step
    bad = np.abs(fd - hp) > rtol * np.abs(hp) + roundoff
    if np.any(bad):
        return HypothesisCheck("h_prime", False, "h_prime disagrees with finite difference",
                               _first(x, bad))
    return HypothesisCheck("h_prime", True, "h_prime matches central difference")


@dataclass(frozen=True)
class GrowthCertificate:
    """Linear-growth constant: ``x ** h(x) <= K (1 + x)`` on the grid."""

    M_inf: float
    R_inf: float
    K: float


def growth_ratio(f: ExponentFunction, x) -> np.ndarray:
    """``x ** h(x) / (1 + x)`` evaluated in log space."""
    x = np.asarray(x, dtype=float)
    return np.exp(np.asarray(f.h(x)) * np.log(x) - np.log1p(x))


def growth_certificate(f: ExponentFunction, grid: GridSpec | None = None,
                       safety: float = SAFETY_FACTOR) -> GrowthCertificate:
    grid = grid or GridSpec()
    x = grid.points()
    hx = np.asarray(f.h(x), dtype=float)
    limit_ok, bounded_ok, _, _ = _h2_tail(f, x, hx)
    if not (limit_ok and bounded_ok):
        raise CertificateError(f"{f.name}: no linear-growth constant, (h2) fails on the grid")
    with np.errstate(over="ignore"):
        ratio = growth_ratio(f, x)
    if not np.all(np.isfinite(ratio)):
        raise CertificateError(f"{f.name}: x^h(x)/(1+x) overflows on the grid")
    tail = x > R_INF
    M_inf = max(0.0, float(np.max((hx[tail] - 1.0) * np.log(x[tail])))) if np.any(tail) else 0.0
    # small-x branch contributes 1: x^h <= x <= 1 + x for x <= 1 and h >= 1
    K = max(1.0, safety * float(np.max(ratio)))
    return GrowthCertificate(M_inf=M_inf, R_inf=R_INF, K=K)


def power_lipschitz(f: ExponentFunction, grid: GridSpec | None = None) -> float:
    """Grid supremum of ``|d/dx x**h(x)|`` (no safety factor)."""
    grid = grid or GridSpec()
    x = grid.points()
    with np.errstate(over="ignore", invalid="ignore"):
        d = np.abs(f.power_dx(x))
    sup = float(np.max(d))
    if not np.isfinite(sup) or sup > OVERFLOW_GUARD:
        raise CertificateError(f"{f.name}: derivative of x^h(x) unbounded on the grid")
    return sup


def lipschitz_constant(p: ExponentFunction, q: ExponentFunction, mu_plus: float,
                       sigma_plus: float, grid: GridSpec | None = None,
                       safety: float = SAFETY_FACTOR) -> float:
    """Joint Lipschitz constant of ``mu(t) x**p(x)`` and ``sigma(t) x**q(x)``."""
    if mu_plus < 0 or sigma_plus < 0:
        raise DomainError("coefficient bounds must be non-negative")
    sup_p = power_lipschitz(p, grid) if mu_plus > 0 else 0.0
    sup_q = power_lipschitz(q, grid) if sigma_plus > 0 else 0.0
    return safety * (mu_plus * sup_p + sigma_plus * sup_q)
