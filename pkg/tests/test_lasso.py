import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdinfer.core import RegressionData, standardize
from hdinfer.errors import DegenerateResponse, NotConvergedWarning
from hdinfer.lasso import (
    SolverConfig,
    fit_lasso,
    fit_lasso_pipeline,
    kkt_gap,
    soft_threshold,
    universal_lambda,
)

from oracles import kkt_violation, lasso_by_enumeration, orthogonal_design


def test_zero_response_gives_empty_support(rng):
    d = standardize(RegressionData(rng.standard_normal((20, 5)), np.zeros(20)))
    fit = fit_lasso(d, 0.1)
    assert np.array_equal(fit.beta_hat, np.zeros(5))
    assert fit.active_set.size == 0
    assert fit.converged


def test_orthogonal_design_soft_thresholds(rng):
    X = orthogonal_design(10, 2, rng)
    y = X @ np.array([3.0, 0.5])
    np.testing.assert_allclose(X.T @ y / 10, [3.0, 0.5], atol=1e-12)
    fit = fit_lasso(RegressionData(X, y, standardized=True), 1.0)
    np.testing.assert_allclose(fit.beta_hat, [2.0, 0.0], atol=1e-10)
    assert fit.beta_hat[1] == 0.0
    assert list(fit.active_set) == [0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 2.0))
def test_soft_threshold_exact_on_orthonormal_designs(seed, lam):
    rng = np.random.default_rng(seed)
    X = orthogonal_design(12, 4, rng)
    y = rng.standard_normal(12) * 2
    fit = fit_lasso(RegressionData(X, y), lam)
    expected = soft_threshold(X.T @ y / 12, lam)
    np.testing.assert_allclose(fit.beta_hat, expected, rtol=0, atol=1e-10)


def test_soft_threshold_tie_is_zero():
    assert soft_threshold(1.0, 1.0) == 0.0
    assert soft_threshold(-1.0, 1.0) == 0.0
    np.testing.assert_array_equal(soft_threshold([3.0, -0.5, -4.0], 1.0), [2.0, 0.0, -3.0])


@pytest.mark.parametrize("seed", range(10))
def test_matches_sign_enumeration(seed):
    rng = np.random.default_rng(seed)
    p = rng.integers(2, 7)
    X = rng.standard_normal((20, p))
    y = X @ rng.standard_normal(p) + rng.standard_normal(20)
    lam = rng.uniform(0.05, 1.0)
    fit = fit_lasso(RegressionData(X, y), lam)
    np.testing.assert_allclose(fit.beta_hat, lasso_by_enumeration(X, y, lam), atol=1e-6)


def test_objective_nonincreasing_over_sweeps(rng):
    X = rng.standard_normal((40, 80))
    beta = np.zeros(80)
    beta[:5] = 3.0
    d = standardize(RegressionData(X, X @ beta + rng.standard_normal(40)))
    fit = fit_lasso(d, 0.2, record_objective=True)
    trace = fit.objective_trace
    assert trace.size == fit.iterations > 1
    assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace[:-1]))


def test_reported_kkt_gap_matches_recomputation(rng):
    X = rng.standard_normal((50, 120))
    y = X[:, :4] @ [2, -1, 1.5, 3] + rng.standard_normal(50)
    d = RegressionData(X, y)
    fit = fit_lasso(d, 0.3)
    assert fit.converged and fit.kkt_gap <= 1e-8
    assert abs(fit.kkt_gap - kkt_violation(X, y, fit.beta_hat, 0.3)) <= 1e-12
    assert abs(fit.kkt_gap - kkt_gap(X, y, fit.beta_hat, 0.3)) <= 1e-15
    assert np.array_equal(fit.active_set, np.flatnonzero(fit.beta_hat))


def test_column_permutation_equivariance(rng):
    X = rng.standard_normal((60, 30))
    y = X[:, [3, 7, 11]] @ [2.0, -2.0, 1.0] + rng.standard_normal(60)
    perm = rng.permutation(30)
    a = fit_lasso(RegressionData(X, y), 0.15)
    b = fit_lasso(RegressionData(X[:, perm], y), 0.15)
    np.testing.assert_allclose(b.beta_hat, a.beta_hat[perm], atol=1e-9)


def test_warm_start_gives_same_solution(rng):
    X = rng.standard_normal((50, 100))
    y = X[:, :3] @ [1.0, 2.0, 3.0] + rng.standard_normal(50)
    d = RegressionData(X, y)
    cold = fit_lasso(d, 0.25)
    warm = fit_lasso(d, 0.25, beta0=fit_lasso(d, 0.4).beta_hat)
    np.testing.assert_allclose(warm.beta_hat, cold.beta_hat, atol=1e-9)


def test_not_converged_returns_iterate_with_flag(rng):
    X = rng.standard_normal((50, 100))
    y = X[:, :10] @ np.ones(10) + rng.standard_normal(50)
    with pytest.warns(NotConvergedWarning):
        fit = fit_lasso(RegressionData(X, y), 0.05, SolverConfig(max_sweeps=1))
    assert not fit.converged
    assert fit.kkt_gap > 1e-8
    assert fit.iterations == 1


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(kkt_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(max_sweeps=0)


def test_universal_lambda_value(rng):
    d = RegressionData(rng.standard_normal((100, 500)), rng.standard_normal(100))
    lam = universal_lambda(d, 1.0)
    assert lam == pytest.approx(math.sqrt(2 * math.log(500) / 100), rel=1e-15)
    assert lam == pytest.approx(0.35255, abs=5e-6)
    assert universal_lambda(d, 1.0, multiplier=2.0) == pytest.approx(2 * lam)


def test_universal_lambda_pilot_uses_sample_sd(rng):
    y = rng.standard_normal(100)
    y = 2 * (y - y.mean()) / y.std(ddof=1)
    d = RegressionData(rng.standard_normal((100, 500)), y)
    assert universal_lambda(d, 0.0) == pytest.approx(2 * math.sqrt(2 * math.log(500) / 100))


def test_universal_lambda_degenerate_cases(rng):
    with pytest.raises(DegenerateResponse):
        universal_lambda(RegressionData(rng.standard_normal((10, 1)), np.ones(10)), 1.0)
    with pytest.raises(DegenerateResponse):
        universal_lambda(RegressionData(rng.standard_normal((10, 3)), np.ones(10)), 0.0)


def test_pipeline_noiseless_keeps_true_support(rng):
    X = rng.standard_normal((100, 200))
    beta = np.zeros(200)
    beta[:3] = 1e3
    d = standardize(RegressionData(X, X @ beta))
    fit, sigma2 = fit_lasso_pipeline(d)
    assert {0, 1, 2} <= set(fit.active_set.tolist())
    # the refit penalty is driven by sigma_hat, well below the pilot's sd(y) scale
    assert fit.lam < universal_lambda(d, 0.0)
    assert sigma2 >= 0


def test_pipeline_two_stage_rule(rng):
    X = rng.standard_normal((80, 40))
    y = X[:, :3] @ [3.0, -2.0, 2.0] + rng.standard_normal(80)
    d = standardize(RegressionData(X, y))
    fit, sigma2 = fit_lasso_pipeline(d)
    pilot = fit_lasso(d, universal_lambda(d, 0.0))
    from hdinfer.debias import estimate_sigma

    s0 = estimate_sigma(d, pilot)
    assert fit.lam == pytest.approx(math.sqrt(s0) * math.sqrt(2 * math.log(40) / 80))
    assert sigma2 == pytest.approx(estimate_sigma(d, fit))
