import cmath
import math

import numpy as np
import pytest

from varexp_sde.errors import DomainError
from varexp_sde.exponents import constant_exponent
from varexp_sde.model import (ModelSpec, certify_coefficient, constant_coefficient, diffusion,
                              diffusion_dx, drift, feller_diagnostic, is_cev, is_gbm,
                              parse_coefficient)

# d/dx [x^{1 + 0.5/(1+x)}] at x = e, by central difference with math.pow
R1_POWER_DX_AT_E = 1.1853011309258108


def r1_x2q(z):
    return cmath.exp(2 * (1 + 0.5 / (1 + z)) * cmath.log(z))


def feller_oracle(x, mu=1.0, sigma=1.0):
    # complex-step derivative of x^{2q(x)}: independent of the library's closed form
    h = 1e-30 * x
    d = r1_x2q(complex(x, h)).imag / h
    return mu * x ** (1 + 0.5 / (1 + x)) - 0.5 * sigma ** 2 * d


def test_drift_and_diffusion(remark1_model, gbm):
    assert drift(gbm, 0.5, 2.0) == pytest.approx(0.1)
    assert diffusion(gbm, 0.5, 2.0) == pytest.approx(0.4)
    assert drift(remark1_model, 0.0, 4.0) == pytest.approx(4 ** 1.1, rel=1e-14)
    assert diffusion_dx(remark1_model, 0.0, math.e) == pytest.approx(R1_POWER_DX_AT_E, rel=1e-8)


@pytest.mark.parametrize("t,x", [(0.0, 0.0), (0.0, -1.0), (2.0, 1.0), (-0.1, 1.0)])
def test_out_of_domain(remark1_model, t, x):
    with pytest.raises(DomainError):
        drift(remark1_model, t, x)


def test_model_rejects_non_class_s():
    two = constant_exponent(2.0)
    with pytest.raises(DomainError, match="class S"):
        ModelSpec(two, two, constant_coefficient(1), constant_coefficient(1), 1.0, 1.0)


@pytest.mark.parametrize("kwargs", [dict(x0=0.0, T=1.0), dict(x0=1.0, T=0.0), dict(x0=1.0, T=1.0, t0=-1)])
def test_model_rejects_bad_start(one, kwargs):
    with pytest.raises(DomainError):
        ModelSpec(one, one, constant_coefficient(1), constant_coefficient(1), **kwargs)


def test_degenerate_needs_flag(one):
    zero = constant_coefficient(0.0)
    with pytest.raises(DomainError):
        ModelSpec(one, one, constant_coefficient(1), zero, 1.0, 1.0)
    m = ModelSpec(one, one, constant_coefficient(1), zero, 1.0, 1.0, allow_degenerate=True)
    assert m.sigma_plus == 0


def test_coefficient_bounds():
    c = parse_coefficient("sine:1,0.5,3", 10.0)
    assert c.f_minus >= 0.5 and c.f_plus <= 1.5
    lin = parse_coefficient("linear:1,2", 1.0)
    assert (lin.f_minus, lin.f_plus) == pytest.approx((1.0, 3.0))
    with pytest.raises(DomainError):
        certify_coefficient(lambda t: 1 + t, 1.0, declared=(1.0, 1.5))
    with pytest.raises(DomainError):
        parse_coefficient("cubic:1", 1.0)


def test_classifiers(gbm, remark1_model):
    assert is_gbm(gbm) and is_cev(gbm)
    assert not is_gbm(remark1_model) and not is_cev(remark1_model)


def test_K_and_bounds(remark1_model):
    assert remark1_model.K == pytest.approx(1.0332547, rel=1e-6)
    assert remark1_model.mu_plus == 1.0 and remark1_model.sigma_plus == 1.0


def test_feller_remark1(remark1_model):
    rep = feller_diagnostic(remark1_model)
    assert rep.passed and rep.verdict == "non-attainable"
    expected = [feller_oracle(x) for x in rep.x]
    np.testing.assert_allclose(rep.values, expected, rtol=1e-9, atol=1e-300)
    assert np.all(rep.values >= -1e-6)
    assert np.all(np.diff(np.abs(rep.values)) < 0)
    assert np.all(rep.lower_bound <= rep.values)


def test_feller_gbm_is_zero_crossing(gbm):
    # linear diffusion: T(x) = (mu - sigma^2) x, negative but vanishing
    rep = feller_diagnostic(gbm)
    np.testing.assert_allclose(rep.values, (0.05 - 0.04) * rep.x, rtol=1e-12)


def test_feller_grid_validation(remark1_model):
    with pytest.raises(DomainError):
        feller_diagnostic(remark1_model, x_grid=[1e-3, 1e-2])
    with pytest.raises(DomainError):
        feller_diagnostic(remark1_model, x_grid=[1e-2, -1.0])
