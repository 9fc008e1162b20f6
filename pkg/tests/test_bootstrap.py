import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hdinfer.bootstrap as bs
from hdinfer.bootstrap import (
    BootstrapDistribution,
    bootstrap_debiased,
    bootstrap_debiased_many,
    ddb_estimate,
    ddb_plugin_ci,
    empirical_quantile,
    lower_median,
    percentile_ci,
    pivots,
)
from hdinfer.core import RegressionData, SeedSpec, standardize
from hdinfer.debias import debias, estimate_sigma, nodewise_direction
from hdinfer.errors import EmptyDraws, InvalidAlpha, TooManyRefitFailures, ZeroSigma
from hdinfer.lasso import fit_lasso


@pytest.fixture
def problem(rng):
    n, p = 60, 80
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:3] = [2.0, -1.5, 1.0]
    d = standardize(RegressionData(X, X @ beta + rng.standard_normal(n)))
    lam = float(np.sqrt(2 * np.log(p) / n))
    fit = fit_lasso(d, lam)
    sigma = float(np.sqrt(estimate_sigma(d, fit)))
    arts = [nodewise_direction(d, j, lam) for j in (0, 1, 10)]
    return d, fit, sigma, arts


def _dist(draws, j=0):
    draws = np.asarray(draws, dtype=float)
    return BootstrapDistribution(j, draws, draws.size, SeedSpec(0))


def test_zero_sigma_collapses_to_point_mass(problem):
    d, fit, _, arts = problem
    art = arts[0]
    dist = bootstrap_debiased(d, fit, 0.0, art, 7, SeedSpec(3))
    assert np.unique(dist.draws).size == 1
    # with y* = X beta_hat the refit reproduces beta_hat, so c is ~0
    refit = fit_lasso(d.with_response(d.X @ fit.beta_hat), fit.lam)
    c = (refit.beta_hat[art.j] - fit.beta_hat[art.j]
         + art.z @ (d.X @ fit.beta_hat - d.X @ refit.beta_hat) / art.denom)
    assert dist.draws[0] == pytest.approx(c, abs=1e-9)
    est = debias(d, fit, art)
    ci = percentile_ci(est.beta_db, dist)
    assert ci.lower == ci.upper == pytest.approx(est.beta_db - c)


def test_single_draw_deterministic(problem):
    d, fit, sigma, arts = problem
    a = bootstrap_debiased(d, fit, sigma, arts[1], 1, SeedSpec(11))
    b = bootstrap_debiased(d, fit, sigma, arts[1], 1, SeedSpec(11))
    assert a.draws.tobytes() == b.draws.tobytes()
    c = bootstrap_debiased(d, fit, sigma, arts[1], 1, SeedSpec(12))
    assert a.draws.tobytes() != c.draws.tobytes()


def test_shared_refits_equal_single_coordinate_runs(problem):
    d, fit, sigma, arts = problem
    many = bootstrap_debiased_many(d, fit, sigma, arts, 20, SeedSpec(5, 1))
    for art, dist in zip(arts, many):
        single = bootstrap_debiased(d, fit, sigma, art, 20, SeedSpec(5, 1))
        assert dist.draws.tobytes() == single.draws.tobytes()
        assert dist.j == art.j and dist.B == 20 and dist.refit_failures == 0


def test_draws_are_debiased_refits(problem):
    d, fit, sigma, arts = problem
    art = arts[0]
    seed = SeedSpec(9)
    dist = bootstrap_debiased(d, fit, sigma, art, 3, seed)
    from hdinfer.core import gaussian_stream

    for b in range(3):
        y_star = d.X @ fit.beta_hat + sigma * gaussian_stream(seed.child(b), d.n)
        star = fit_lasso(d.with_response(y_star), fit.lam)
        db = debias(d.with_response(y_star), star, art).beta_db
        assert dist.draws[b] == pytest.approx(db - fit.beta_hat[art.j], abs=1e-8)


def test_quantile_examples():
    assert empirical_quantile([5.0], 0.01) == 5.0
    assert empirical_quantile([5.0], 0.99) == 5.0
    assert empirical_quantile([4.0, 1.0, 3.0, 2.0], 0.5) == 2.0
    draws = np.arange(100.0)
    assert empirical_quantile(draws, 1 - 1e-12) == 99.0
    assert empirical_quantile(draws, 1e-12) == 0.0
    assert empirical_quantile(draws, 0.05) == 4.0  # rank 5
    assert empirical_quantile(draws, 0.975) == 97.0  # rank 98
    with pytest.raises(EmptyDraws):
        empirical_quantile([], 0.5)
    with pytest.raises(InvalidAlpha):
        empirical_quantile([1.0], 1.0)


def test_percentile_ci_examples():
    ci = percentile_ci(2.0, _dist(np.full(10, 0.25)))
    assert ci.lower == ci.upper == 1.75
    sym = np.linspace(-1, 1, 401)
    ci = percentile_ci(3.0, _dist(sym))
    assert ci.method == "BS-DB"
    assert (ci.lower + ci.upper) / 2 == pytest.approx(3.0, abs=0.01)
    with pytest.raises(InvalidAlpha):
        percentile_ci(0.0, _dist(sym), 1.0)


def test_ddb_examples():
    assert ddb_estimate(1.5, _dist(np.zeros(4))) == 1.5
    assert ddb_estimate(1.5, _dist([3.0, 1.0])) == 0.5
    assert lower_median([4.0, 1.0, 2.0, 3.0]) == 2.0
    assert lower_median([3.0, 1.0, 2.0]) == 2.0
    with pytest.raises(EmptyDraws):
        lower_median([])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60),
    st.floats(-10, 10),
    st.floats(0.05, 0.9),
    st.floats(0.05, 0.9),
)
def test_ci_nesting_and_ddb_identity(draws, beta_db, l1, l2):
    dist = _dist(draws)
    lo, hi = sorted((l1, l2))
    small, big = percentile_ci(beta_db, dist, lo), percentile_ci(beta_db, dist, hi)
    assert small.lower <= small.upper
    assert big.lower <= small.lower and small.upper <= big.upper
    assert ddb_estimate(beta_db, dist) + lower_median(dist.draws) == beta_db or np.isclose(
        ddb_estimate(beta_db, dist) + lower_median(dist.draws), beta_db, rtol=0, atol=1e-12
    )


def test_pivots_examples_and_scale_invariance(problem):
    d, fit, sigma, arts = problem
    art = arts[0]
    est = debias(d, fit, art)
    pv = pivots(est, est.beta_db, art, sigma, est.beta_db)
    assert pv.R_j == 0.0 and pv.R_j_ddb == 0.0
    assert pv.scale == pytest.approx(art.denom / np.sqrt(art.z_norm2)) and pv.scale > 0

    ddb = est.beta_db - 0.1
    a = pivots(est, ddb, art, sigma, 1.7)
    for c in (0.5, 3.0, 1e3):
        scaled = dataclasses.replace(
            art, z=c * art.z, denom=c * art.denom, z_norm2=c * c * art.z_norm2
        )
        b = pivots(est, ddb, scaled, sigma, 1.7)
        assert b.R_j == pytest.approx(a.R_j, rel=1e-12)
        assert b.R_j_ddb == pytest.approx(a.R_j_ddb, rel=1e-12)
    with pytest.raises(ZeroSigma):
        pivots(est, ddb, art, 0.0, 1.7)


def test_ddb_plugin_ci_centred(problem):
    d, fit, sigma, arts = problem
    ci = ddb_plugin_ci(0.3, arts[0], sigma, 0.9)
    assert ci.method == "DDB-plug-in"
    assert (ci.lower + ci.upper) / 2 == pytest.approx(0.3)


def test_distribution_validation():
    with pytest.raises(ValueError):
        BootstrapDistribution(0, np.zeros(3), 5, SeedSpec(0), 0)
    with pytest.raises(TooManyRefitFailures):
        BootstrapDistribution(0, np.zeros(7), 10, SeedSpec(0), 3)
    with pytest.raises(ValueError):
        BootstrapDistribution(0, np.array([np.inf]), 1, SeedSpec(0))
    ok = BootstrapDistribution(0, np.zeros(8), 10, SeedSpec(0), 2)
    assert not ok.draws.flags.writeable


def test_refit_failures_counted_and_ceiling_enforced(problem, monkeypatch):
    d, fit, sigma, arts = problem
    real = bs._solve
    calls = {"k": 0}

    def flaky(every):
        def solve(X, y, lam, config, *a, **kw):
            calls["k"] += 1
            beta, gap, sweeps, trace = real(X, y, lam, config, *a, **kw)
            if calls["k"] % every == 0:
                gap = 1.0
            return beta, gap, sweeps, trace
        return solve

    monkeypatch.setattr(bs, "_solve", flaky(10))
    dist = bootstrap_debiased(d, fit, sigma, arts[0], 20, SeedSpec(1))
    assert dist.refit_failures == 2 and dist.draws.size == 18

    calls["k"] = 0
    monkeypatch.setattr(bs, "_solve", flaky(3))
    with pytest.raises(TooManyRefitFailures):
        bootstrap_debiased(d, fit, sigma, arts[0], 20, SeedSpec(1))


def test_bootstrap_argument_checks(problem):
    d, fit, sigma, arts = problem
    with pytest.raises(ValueError):
        bootstrap_debiased(d, fit, sigma, arts[0], 0, SeedSpec(0))
    with pytest.raises(ValueError):
        bootstrap_debiased(d, fit, -1.0, arts[0], 5, SeedSpec(0))
