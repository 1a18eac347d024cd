import math

import numpy as np
import pytest

from varexp_sde.analysis import (asymptotic_bound, bdg_constant, moment_bound, stability_bound,
                                 verify_asymptotic, verify_moment_bound, verify_stability)
from varexp_sde.errors import DomainError
from varexp_sde.simulate import Observable, PathGrid, run_paths


def test_moment_bound_formula(gbm):
    mb = moment_bound(gbm, 3)
    K, t = gbm.K, 0.5
    A = 36 * 0.05 ** 3 * t ** 2 * K ** 3
    B = 36 * 0.2 ** 3 * 3 ** 1.5 * t ** 0.5 * K ** 3
    assert mb.A(t) == pytest.approx(A) and mb.B(t) == pytest.approx(B)
    assert mb.bound(t) == pytest.approx((9 + t * (A + B)) * math.exp(t * (A + B)))
    assert moment_bound(gbm.with_x0(2.0), 3, use_x0m=True).x0_term == 8.0


def test_moment_bound_vacuous(remark1_model):
    assert math.isinf(moment_bound(remark1_model, 4).bound(0.5))
    with pytest.raises(DomainError):
        moment_bound(remark1_model, 1.5)


def test_bdg_constant():
    assert bdg_constant(2) == 1.0
    assert bdg_constant(4) == 36.0


def test_stability_bound_formula(gbm):
    sb = stability_bound(gbm, 2, T=1.0, L=1.0)
    assert sb.C_m == 1.0
    assert sb.L_bar() == pytest.approx(3 * (0.05 ** 2 + 0.2 ** 2))
    assert sb.factor == pytest.approx(3 * math.exp(3 * 0.0425))


def test_K_hat(gbm):
    assert asymptotic_bound(gbm).K_hat == pytest.approx(4 * max(gbm.K ** 2 * 0.04, gbm.K * 0.05))
    assert asymptotic_bound(gbm).K_hat == pytest.approx(0.202, abs=1e-6)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_moment_check_gbm(gbm, m):
    rep = verify_moment_bound(gbm, m, PathGrid(0, 0.5, 50), seed=1, n_paths=4000, n_checkpoints=5)
    assert rep.passed
    assert rep.checkpoints[0] == 0 and rep.checkpoints[-1] == pytest.approx(0.5)
    assert rep.empirical[0] == 1.0
    assert rep.to_csv().splitlines()[0] == "t,empirical,SE,bound"
    assert rep.to_dict()["pass"] is True


def test_moment_check_reports_vacuous(remark1_model):
    rep = verify_moment_bound(remark1_model, 4, PathGrid(0, 0.5, 50), 1, 1000, n_checkpoints=2)
    assert rep.vacuous and rep.passed
    assert "vacuous" in rep.to_dict()["bound"]


def test_stability_gbm_is_linear(gbm):
    # Euler for linear SDEs: X_xi - X_eta = (xi - eta) * X_1 path by path
    grid = PathGrid(0, 1, 100)
    rep = verify_stability(gbm, 2, 1.0, 1.01, grid, seed=4, n_paths=2000)
    sup_sq = Observable("sup X^2", lambda t, X: np.max(X, axis=1) ** 2)
    ref = run_paths(gbm, grid, "euler", 4, 2000, [sup_sq]).samples[:, 0]
    assert rep.empirical == pytest.approx(1e-4 * ref.mean(), rel=1e-8)
    assert rep.passed and rep.rate_ok
    assert rep.rate_exponent == pytest.approx(2.0, abs=1e-6)
    assert rep.to_dict()["bound"] == pytest.approx(rep.factor * 1e-4)


def test_stability_rejects_bad_start(gbm):
    with pytest.raises(DomainError):
        verify_stability(gbm, 2, 0.0, 1.0, PathGrid(0, 1, 10), 0, 10)


def test_asymptotic_gbm(gbm):
    rep = verify_asymptotic(gbm, 20, PathGrid(0, 20, 400), seed=6, n_paths=400)
    assert rep.passed
    assert rep.drift_limit == pytest.approx(0.03)
    # log X(T) / T is normal(0.03, 0.2 / sqrt(20)) up to Euler bias
    assert rep.terminal_median == pytest.approx(0.03, abs=4 * 1.25 * 0.2 / math.sqrt(20 * 400))
    q = rep.quantiles
    assert q["q01"] <= q["median"] <= q["q99"]
    assert rep.to_dict()["terminal_rate_median"] == rep.terminal_median


def test_asymptotic_guards(gbm):
    with pytest.raises(DomainError):
        verify_asymptotic(gbm, 5, PathGrid(0, 5, 10), 0, 10)
    with pytest.raises(DomainError):
        verify_asymptotic(gbm, 20, PathGrid(0, 10, 10), 0, 10)
