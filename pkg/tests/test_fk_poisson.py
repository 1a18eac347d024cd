import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varexp_sde.errors import DomainError, ExitTimeoutError
from varexp_sde.exponents import constant_exponent, remark1_exponent
from varexp_sde.fk_poisson import (PoissonProblem, bias_constant, cross_validate, fd_convergence,
                                   fd_solve, fd_system, fk_solve, fk_solve_pair,
                                   manufactured_problem, parse_source)

ONE = constant_exponent(1.0)
R1 = remark1_exponent()


def gbm_exit_time(x, a=1.0, b=2.0, mu=1.0, sigma=1.0):
    """E[exit time] of GBM from (a, b): log X is a drifted Brownian motion."""
    nu = mu - 0.5 * sigma ** 2
    k = 2 * nu / sigma ** 2
    L = math.log(b / a)
    y = np.log(np.asarray(x) / a)
    return L * (1 - np.exp(-k * y)) / (nu * (1 - math.exp(-k * L))) - y / nu


@pytest.fixture(scope="module")
def gbm_problem():
    return PoissonProblem(1.0, 2.0, 0.0, parse_source("const:1"), 1.0, 1.0, ONE, ONE)


@pytest.fixture(scope="module")
def r1_problem():
    return PoissonProblem(1.0, 2.0, 1.0, parse_source("const:1"), 1.0, 1.0, R1, R1)


def test_fd_matches_closed_form(gbm_problem):
    sol = fd_solve(gbm_problem, 512)
    np.testing.assert_allclose(sol.u, gbm_exit_time(sol.x), atol=1e-7)
    assert sol.u[0] == sol.u[-1] == 0.0
    assert sol.residual < 1e-12


def test_fd_banded_matches_dense(r1_problem):
    x, lo, d, up, rhs = fd_system(r1_problem, 64)
    A = np.diag(d) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)
    dense = np.linalg.solve(A, rhs)
    np.testing.assert_allclose(fd_solve(r1_problem, 64).u[1:-1], dense, rtol=1e-12)


@pytest.mark.parametrize("n", [32, 128, 512])
def test_fd_richardson(r1_problem, n):
    conv = fd_convergence(r1_problem, n)
    assert 3.5 <= conv.ratio <= 4.5
    assert conv.to_dict()["pass"]


def test_manufactured_is_consistent():
    prob, u = manufactured_problem(1.0, 3.0, 0.5, 1.0, 0.7, R1, R1)
    assert u(1.0) == pytest.approx(0, abs=1e-15) and u(2.0) == pytest.approx(1.0)
    sol = fd_solve(prob, 1024)
    assert np.max(np.abs(sol.u - u(sol.x))) < 1e-5


def test_fd_input_checks(r1_problem):
    with pytest.raises(DomainError):
        fd_solve(r1_problem, 8)
    with pytest.raises(DomainError):
        PoissonProblem(2.0, 1.0, 1.0, parse_source("const:1"), 1, 1, R1, R1)
    with pytest.raises(DomainError):
        PoissonProblem(1.0, 2.0, -1.0, parse_source("const:1"), 1, 1, R1, R1)
    with pytest.raises(DomainError):
        parse_source("exp:1")


def test_poly_source():
    f = parse_source("poly:1,0,2")
    np.testing.assert_allclose(f(np.array([0.0, 2.0])), [1.0, 9.0])


def test_fk_zero_source(r1_problem):
    prob = PoissonProblem(1.0, 2.0, 1.0, parse_source("const:0"), 1.0, 1.0, R1, R1)
    est = fk_solve(prob, 1.5, 1e-3, 200, seed=1)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_fk_exits_through_boundary(r1_problem):
    est = fk_solve(r1_problem, 1.5, 1e-3, 500, seed=2)
    pos = est.exit_positions
    assert np.all((pos <= 1.0) | (pos >= 2.0))
    assert np.all(pos > 0)
    assert 0 < np.mean(pos >= 2.0) < 1


def test_fk_near_boundary_is_small(r1_problem):
    est = fk_solve(r1_problem, 1.0 + 1e-4, 1e-4, 500, seed=3)
    assert est.mean < 0.01


def test_fk_decreases_with_discount():
    vals = []
    for c in (0.0, 1.0, 5.0):
        prob = PoissonProblem(1.0, 2.0, c, parse_source("const:1"), 1.0, 1.0, R1, R1)
        vals.append(fk_solve(prob, 1.5, 1e-3, 300, seed=4).samples)
    assert np.all(vals[0] >= vals[1]) and np.all(vals[1] >= vals[2])


def test_fk_gbm_against_closed_form(gbm_problem):
    rep = cross_validate(gbm_problem, [1.25, 1.5], 1e-3, 4000, 512, seed=3)
    assert rep.passed
    for p in rep.probes:
        exact = float(gbm_exit_time(p.probe))
        assert abs(p.fk_mean - exact) <= 3 * p.fk_se + p.allowance
    data = json.loads(rep.to_json())
    assert data["pass"] and len(data["probes"]) == 2


def test_pair_coarse_matches_single(r1_problem):
    single = fk_solve(r1_problem, 1.5, 1e-3, 300, seed=5)
    coarse, fine = fk_solve_pair(r1_problem, 1.5, 1e-3, 300, seed=5)
    np.testing.assert_array_equal(single.samples, coarse.samples)
    assert fine.dt == 5e-4


def test_fk_threads_identical(r1_problem):
    a = fk_solve(r1_problem, 1.5, 1e-3, 9000, seed=6, threads=1)
    b = fk_solve(r1_problem, 1.5, 1e-3, 9000, seed=6, threads=8)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_fk_timeout(r1_problem):
    with pytest.raises(ExitTimeoutError) as info:
        fk_solve(r1_problem, 1.5, 1e-3, 50, seed=7, max_time=1e-2)
    assert info.value.n_unexited > 0


def test_fk_guards(r1_problem):
    with pytest.raises(DomainError):
        fk_solve(r1_problem, 2.5, 1e-3, 10, seed=0)
    with pytest.raises(DomainError):
        fk_solve(r1_problem, 1.5, 1e-3, 1, seed=0)


def test_bias_constant_zero_gap():
    s = np.linspace(0, 1, 10)
    assert bias_constant(s, s, 1e-4) == 0.0


@settings(max_examples=15, deadline=None)
@given(x=st.floats(1.05, 1.95), c=st.floats(0.0, 3.0))
def test_fd_solution_bounded(x, c):
    # 0 <= u <= E[tau] for f = 1, and the discount only lowers it
    prob = PoissonProblem(1.0, 2.0, c, parse_source("const:1"), 1.0, 1.0, ONE, ONE)
    u = fd_solve(prob, 256)(x)
    assert 0 <= u <= float(gbm_exit_time(x)) + 1e-6
