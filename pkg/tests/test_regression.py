import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from oracles import bic_brute, complexity_brute, ols_normal_equations
from vibim.regression import complexity, criteria, fit_ols, ols_inference


def test_fit_matches_normal_equations():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 6))
    y = X @ rng.standard_normal(6) + rng.standard_normal(40)
    cols = [0, 2, 5]
    fit = fit_ols(X, cols, y)
    b0, b, rss = ols_normal_equations(X[:, cols], y)
    assert fit.intercept == pytest.approx(b0, rel=1e-10)
    np.testing.assert_allclose(fit.coef, b, rtol=1e-10)
    assert fit.rss == pytest.approx(rss, rel=1e-10)
    assert fit.df == 4


def test_null_model_and_rank_deficiency():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((20, 2))
    X = np.column_stack([X, X[:, 0] + X[:, 1]])
    y = rng.standard_normal(20)
    null = fit_ols(X, [], y)
    assert null.intercept == pytest.approx(y.mean())
    assert null.rss == pytest.approx(null.tss)
    fit = fit_ols(X, [0, 1, 2], y)
    assert fit.rank == 2
    assert fit.df == 3


def test_complexity_values():
    assert complexity(0, 10) == pytest.approx(2 * math.log(2))
    # k log(e p*/k) + 2 log(k + 2) at k=3, p*=10
    assert complexity(3, 10) == pytest.approx(3 * math.log(math.e * 10 / 3) + 2 * math.log(5))
    with pytest.raises(ValueError):
        complexity(11, 10)


def test_criteria_against_direct_formula():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 5))
    y = X[:, 0] + rng.standard_normal(30)
    cols = [0, 3]
    fit = fit_ols(X, cols, y)
    cv = criteria(fit, 2, 5, psi=0.5)
    assert cv.bic == pytest.approx(bic_brute(X, y, cols), rel=1e-12)
    aic = 30 * math.log(fit.rss / 30) + 2 * 3
    assert cv.aic == pytest.approx(aic, rel=1e-12)
    assert cv.bic_p == pytest.approx(cv.bic + 2 * 0.5 * complexity_brute(2, 5))
    assert cv.aic_p == pytest.approx(cv.aic + 2 * 0.5 * complexity_brute(2, 5))


def test_saturated_fit_stays_finite():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((5, 4))
    y = rng.standard_normal(5)
    fit = fit_ols(X, range(4), y)
    assert fit.degenerate
    assert math.isnan(fit.sigma2_hat)
    cv = criteria(fit, 4, 4)
    assert math.isfinite(cv.bic)


def test_inference_matches_textbook_formulas():
    rng = np.random.default_rng(4)
    n = 60
    X = rng.standard_normal((n, 3))
    y = 1 + 0.5 * X[:, 0] + rng.standard_normal(n)
    inf = ols_inference(X, [0, 1, 2], y)
    A = np.column_stack([np.ones(n), X])
    beta = np.linalg.solve(A.T @ A, A.T @ y)
    resid = y - A @ beta
    s2 = resid @ resid / (n - 4)
    se = np.sqrt(np.diag(s2 * np.linalg.inv(A.T @ A)))
    t = beta / se
    p = 2 * stats.t.sf(np.abs(t), n - 4)
    np.testing.assert_allclose(inf.estimate, beta, rtol=1e-9)
    np.testing.assert_allclose(inf.std_error, se, rtol=1e-9)
    np.testing.assert_allclose(inf.p_value, p, rtol=1e-7, atol=1e-14)
    assert inf.df_resid == n - 4


@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 10_000))
def test_bic_argmin_invariant_to_response_scale(scale, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 4))
    y = X[:, 1] - X[:, 2] + rng.standard_normal(40)
    sets = [[], [1], [1, 2], [0, 1, 2], [0, 1, 2, 3]]
    base = [criteria(fit_ols(X, s, y), len(s), 4).bic for s in sets]
    scaled = [criteria(fit_ols(X, s, scale * y), len(s), 4).bic for s in sets]
    assert int(np.argmin(base)) == int(np.argmin(scaled))
    # rescaling shifts every BIC by the same constant n log(scale^2)
    np.testing.assert_allclose(np.subtract(scaled, base), 40 * math.log(scale**2), atol=1e-6)
