import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varexp_sde.errors import DomainError, ShapeError
from varexp_sde.picard import (contraction_plan, ensemble_norm, largest_interval, phi_apply,
                               solve_fixed_point, solve_global, state_lipschitz)
from varexp_sde.simulate import PathGrid, integrate
from varexp_sde.streams import brownian_increments


def test_state_lipschitz(gbm, remark1_model):
    assert state_lipschitz(gbm) == pytest.approx(1.01)
    assert state_lipschitz(remark1_model) == pytest.approx(1.01 * 1.255637937, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(L=st.floats(0.1, 10), mu=st.floats(0, 5), sig=st.floats(0.01, 5),
       c=st.floats(0.05, 0.95))
def test_largest_interval_hits_target(L, mu, sig, c):
    tau = largest_interval(L, mu, sig, c)
    c_tau = math.sqrt(2 * L * L * tau * (tau * mu * mu + sig * sig))
    assert c_tau == pytest.approx(c, rel=1e-10)


def test_plan_gbm(gbm):
    plan = contraction_plan(gbm, 0.0, 10.0)
    assert plan.c_of(plan.T_star) == pytest.approx(0.5, rel=1e-10)
    assert plan.n_intervals == math.ceil(10.0 / plan.T_star)
    # horizons shorter than T_star are covered in one piece
    assert contraction_plan(gbm).n_intervals == 1
    with pytest.raises(DomainError):
        contraction_plan(gbm, c_target=1.0)


def test_phi_on_constant_path(remark1_model):
    grid = PathGrid(0, 0.05, 20)
    dW = brownian_increments(4, np.arange(3), 20, grid.dt)
    X = np.ones((3, 21))
    out = phi_apply(remark1_model, grid, X, dW)
    W = np.concatenate([np.zeros((3, 1)), np.cumsum(dW, axis=1)], axis=1)
    np.testing.assert_allclose(out, 1 + grid.times + W, rtol=1e-12)


def test_phi_shape_errors(remark1_model):
    grid = PathGrid(0, 0.05, 20)
    with pytest.raises(ShapeError):
        phi_apply(remark1_model, grid, np.ones((3, 20)), np.zeros((3, 20)))
    with pytest.raises(ShapeError):
        phi_apply(remark1_model, grid, np.ones((3, 21)), np.zeros((2, 20)))
    with pytest.raises(ShapeError):
        phi_apply(remark1_model, grid, np.ones(21), np.zeros(20))


def test_ensemble_norm_constant():
    grid = PathGrid(0, 2, 10)
    norm, se = ensemble_norm(np.full((5, 11), 3.0), grid)
    assert norm == pytest.approx(3 * math.sqrt(2)) and se == 0


def test_fixed_point_is_euler(remark1_model):
    plan = contraction_plan(remark1_model)
    grid = PathGrid(0, plan.T_star, 30)
    res = solve_fixed_point(remark1_model, grid, seed=8, n_paths=200, tol=1e-12)
    assert res.converged
    X, _ = integrate(remark1_model, grid, "euler", 1.0, res.dW)
    np.testing.assert_allclose(res.ensemble, X, rtol=1e-10)
    assert res.residual < 1e-10
    lines = res.log_csv().splitlines()
    assert lines[0] == "iteration,norm,norm_se,ratio,ratio_se"
    assert len(lines) == res.iterations + 1


def test_ratios_below_target(gbm):
    plan = contraction_plan(gbm, 0.0, 10.0)
    grid = PathGrid(0, plan.T_star, 100)
    res = solve_fixed_point(gbm, grid, seed=1, n_paths=500, tol=1e-10, plan=plan)
    for r in res.log[1:8]:
        assert r.ratio <= 0.5 + 3 * r.ratio_se


def test_interval_too_long(gbm):
    plan = contraction_plan(gbm, 0.0, 10.0)
    with pytest.raises(DomainError):
        solve_fixed_point(gbm, PathGrid(0, 2 * plan.T_star, 10), 0, 10, 1e-6, plan=plan)


def test_global_chain_matches_euler(remark1_model):
    res = solve_global(remark1_model, 0.0, 0.3, 10, seed=3, n_paths=100, tol=1e-12)
    assert res.plan.n_intervals == len(res.intervals) > 1
    assert all(r.converged for r in res.intervals)
    n = res.plan.n_intervals * 10
    grid = PathGrid(0, 0.3, n)
    dW = brownian_increments(3, np.arange(100), n, grid.dt)
    X, _ = integrate(remark1_model, grid, "euler", 1.0, dW)
    np.testing.assert_allclose(res.ensemble, X, rtol=1e-9)
    np.testing.assert_allclose(res.times, grid.times, atol=1e-12)
    d = res.to_dict()
    assert d["n_intervals"] == res.plan.n_intervals and "c_formula" in d
