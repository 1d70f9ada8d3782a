import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar

from conftest import random_design
from oracles import kkt_residuals, lambda_max, ols_normal_equations, soft_threshold
from vibim.encoding import Predictor, PredictorSchema, encode
from vibim.solvers import (
    AllConstantDesign,
    Penalty,
    PenaltySpec,
    _shrink,
    fit_path,
    lambda_grid,
    model_of_size,
    select_by_bic,
    select_by_cv,
)

SPECS = [PenaltySpec.lasso(), PenaltySpec.scad(), PenaltySpec.mcp()]


def continuous_design(X):
    schema = PredictorSchema(tuple(Predictor.continuous(f"x{j}") for j in range(X.shape[1])))
    return encode(schema, {f"x{j}": X[:, j] for j in range(X.shape[1])})


def kkt_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(30, 80))
    levels = tuple(int(v) for v in rng.integers(2, 5, size=rng.integers(0, 3)))
    d = random_design(rng, n, int(rng.integers(2, 8)), levels)
    beta = rng.standard_normal(d.n_columns) * (rng.random(d.n_columns) < 0.4)
    y = d.matrix @ beta + rng.standard_normal(n)
    return d, y


def assert_kkt(design, y, path):
    for k in range(len(path)):
        lam = path.lambdas[k]
        active, inactive = kkt_residuals(design, y, path.betas[k], lam)
        assert all(a <= 1e-5 for a in active), (k, max(active))
        assert all(e <= 1e-5 for e in inactive), (k, max(inactive))


@pytest.mark.parametrize("seed", range(50))
def test_group_lasso_kkt_every_step(seed):
    d, y = kkt_instance(seed)
    path = fit_path(d, y, PenaltySpec.lasso())
    assert path.converged.all()
    assert_kkt(d, y, path)


def test_lambda_zero_matches_ols():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((60, 5))
    y = X @ np.array([1.0, -2.0, 0.5, 0.0, 3.0]) + rng.standard_normal(60)
    d = continuous_design(X)
    b0, b, _ = ols_normal_equations(X, y)
    for spec in (PenaltySpec.lasso(lambda_grid=(0.0,)), PenaltySpec.scad(lambda_grid=(0.0,)),
                 PenaltySpec.mcp(lambda_grid=(0.0,))):
        path = fit_path(d, y, spec)
        np.testing.assert_allclose(path.betas[0], b, rtol=1e-6)
        assert path.intercepts[0] == pytest.approx(b0, rel=1e-6)


def test_lambda_zero_matches_ols_with_categoricals():
    rng = np.random.default_rng(8)
    d = random_design(rng, 80, 3, (3, 4))
    y = d.matrix @ rng.standard_normal(d.n_columns) + rng.standard_normal(80)
    path = fit_path(d, y, PenaltySpec.lasso(lambda_grid=(0.0,)))
    b0, b, _ = ols_normal_equations(d.matrix, y)
    np.testing.assert_allclose(path.betas[0], b, rtol=1e-6)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family.value)
def test_objective_never_increases_within_a_step(spec):
    for seed in range(10):
        d, y = kkt_instance(100 + seed)
        path = fit_path(d, y, spec, trace=True)
        obj, step = path.objective_trace, path.trace_step
        assert obj.size > 0
        for a, b, sa, sb in zip(obj[:-1], obj[1:], step[:-1], step[1:]):
            if sa == sb:
                assert b <= a * (1 + 1e-10) + 1e-300


def test_soft_threshold_on_single_column():
    rng = np.random.default_rng(9)
    n = 50
    x = rng.standard_normal(n)
    x = (x - x.mean()) / np.sqrt(np.mean((x - x.mean()) ** 2))
    y = 0.7 * x + rng.standard_normal(n)
    z = float(x @ (y - y.mean()) / n)
    grid = tuple(abs(z) * np.array([1.5, 1.0, 0.8, 0.5, 0.2, 0.0]))
    path = fit_path(continuous_design(x[:, None]), y, PenaltySpec.lasso(lambda_grid=grid))
    for k, lam in enumerate(grid):
        assert path.betas[k, 0] == pytest.approx(soft_threshold(z, lam), abs=1e-9)


def test_lambda_max_boundary():
    rng = np.random.default_rng(10)
    d = continuous_design(rng.standard_normal((40, 1)))
    y = d.matrix[:, 0] + rng.standard_normal(40)
    lmax = lambda_grid(d, y, 1)[0]
    path = fit_path(d, y, PenaltySpec.lasso(lambda_grid=(lmax, lmax * (1 - 1e-9))))
    assert path.active(0) == frozenset()
    assert path.active(1) == frozenset({0})


@pytest.mark.parametrize("seed", range(5))
def test_lambda_max_matches_gradient_oracle(seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng, 50, 6, (3, 4))
    y = rng.standard_normal(50) + d.matrix[:, 0]
    assert lambda_grid(d, y)[0] == pytest.approx(lambda_max(d, y), rel=1e-10)


def test_grid_shape():
    rng = np.random.default_rng(11)
    d = continuous_design(rng.standard_normal((30, 4)))
    y = rng.standard_normal(30)
    g2 = lambda_grid(d, y, 2)
    assert g2[1] == pytest.approx(g2[0] * 1e-4)
    g = lambda_grid(d, y)
    assert g.size == 100 and (np.diff(g) < 0).all()
    np.testing.assert_allclose(np.diff(np.log(g)), np.diff(np.log(g))[0])


def test_wide_design_uses_larger_min_ratio():
    rng = np.random.default_rng(12)
    d = continuous_design(rng.standard_normal((10, 20)))
    y = rng.standard_normal(10)
    g = lambda_grid(d, y, 2)
    assert g[1] == pytest.approx(0.05 * g[0])


def test_first_step_is_null_and_active_matches_norms():
    d, y = kkt_instance(3)
    for spec in SPECS:
        path = fit_path(d, y, spec)
        assert path.active(0) == frozenset()
        for k in range(len(path)):
            nz = {g for g, cols in enumerate(d.groups) if np.any(path.betas[k, cols] != 0)}
            assert path.active(k) == nz


def test_constant_columns_stay_zero():
    rng = np.random.default_rng(13)
    schema = PredictorSchema((Predictor.categorical("c", ["a", "b"]), Predictor.continuous("x")))
    x = rng.standard_normal(30)
    d = encode(schema, {"c": ["a"] * 30, "x": x})
    path = fit_path(d, 2 * x + rng.standard_normal(30))
    assert (path.betas[:, 0] == 0).all()
    with pytest.raises(AllConstantDesign):
        fit_path(encode(schema, {"c": ["a"] * 5, "x": [1.0] * 5}), np.arange(5.0))


def test_saturation_stops_path():
    rng = np.random.default_rng(14)
    d = continuous_design(rng.standard_normal((15, 40)))
    y = d.matrix[:, :6] @ np.arange(1.0, 7.0) + 0.1 * rng.standard_normal(15)
    path = fit_path(d, y, PenaltySpec.lasso(max_active_columns=5, lambda_min_ratio=1e-4))
    assert len(path) < 100
    assert len(path.active(len(path) - 1)) >= 5
    assert all(len(path.active(k)) < 5 for k in range(len(path) - 1))


@given(k=st.floats(0.1, 20.0), seed=st.integers(0, 1000))
def test_scaling_equivariance(k, seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng, 40, 3, (3,))
    y = d.matrix[:, 0] - d.matrix[:, 2] + rng.standard_normal(40)
    grid = lambda_grid(d, y, 20)
    a = fit_path(d, y, PenaltySpec.lasso(lambda_grid=tuple(grid)))
    b = fit_path(d, k * y, PenaltySpec.lasso(lambda_grid=tuple(k * grid)))
    assert len(a) == len(b)
    np.testing.assert_allclose(b.betas, k * a.betas, rtol=1e-5, atol=1e-6 * k)


def _penalty(t, lg, family, shape):
    if family == "lasso":
        return lg * t
    if family == "mcp":
        return lg * t - t * t / (2 * shape) if t <= shape * lg else shape * lg * lg / 2
    if t <= lg:
        return lg * t
    if t <= shape * lg:
        return -(t * t - 2 * shape * lg * t + lg * lg) / (2 * (shape - 1))
    return (shape + 1) * lg * lg / 2


@pytest.mark.parametrize("family,code,shape", [("lasso", 0, 0.0), ("scad", 1, 3.7), ("mcp", 2, 3.0)])
@given(z=st.floats(0.0, 10.0), lam=st.floats(0.05, 2.0), m=st.sampled_from([1.0, math.sqrt(2), 2.0]))
def test_threshold_operator_minimizes_scalar_problem(family, code, shape, z, lam, m):
    lg = lam * m
    f = lambda t: 0.5 * (t - z) ** 2 + _penalty(t, lg, family, shape)
    t_hat = _shrink(z, lam, m, code, shape)
    res = minimize_scalar(f, bounds=(0.0, max(z, 1e-12)), method="bounded",
                          options={"xatol": 1e-12})
    best = min(f(0.0), res.fun, f(z))
    assert f(t_hat) <= best + 1e-9


def test_penalty_spec_validation():
    with pytest.raises(ValueError):
        PenaltySpec.scad(a=2.0)
    with pytest.raises(ValueError):
        PenaltySpec.mcp(gamma=1.0)
    with pytest.raises(ValueError):
        PenaltySpec.lasso(lambda_grid=(1.0, 1.0))
    with pytest.raises(ValueError):
        PenaltySpec.lasso(lambda_grid=(1.0, -0.5))
    assert PenaltySpec.scad().shape == 3.7
    assert PenaltySpec.mcp().shape == 3.0
    assert PenaltySpec("scad").family is Penalty.SCAD


def brute_loo(design, y, spec):
    full = fit_path(design, y, spec)
    fixed = PenaltySpec(spec.family, spec.shape, tuple(full.grid))
    n = design.n
    err = np.zeros(len(full))
    for i in range(n):
        keep = np.array([j for j in range(n) if j != i])
        path = fit_path(design.take_rows(keep), y[keep], fixed)
        for k in range(len(full)):
            pred = path.intercepts[k] + design.matrix[i] @ path.betas[k]
            err[k] += (pred - y[i]) ** 2
    return err / n


def test_leave_one_out_matches_brute_force():
    rng = np.random.default_rng(15)
    d = continuous_design(rng.standard_normal((10, 2)))
    y = 2 * d.matrix[:, 0] + rng.standard_normal(10)
    spec = PenaltySpec.lasso(n_lambda=20)
    err = brute_loo(d, y, spec)
    sel = select_by_cv(d, y, spec, folds=10, rng=0)
    assert sel.index == int(np.argmin(err))
    assert sel.score == pytest.approx(err.min(), rel=1e-9)


def test_cv_and_bic_validate_inputs():
    d, y = kkt_instance(1)
    with pytest.raises(ValueError):
        select_by_cv(d, y, folds=1)
    with pytest.raises(ValueError):
        select_by_cv(d, y, folds=d.n + 1)
    a = select_by_cv(d, y, folds=5, rng=3)
    b = select_by_cv(d, y, folds=5, rng=3)
    assert a == b


def _null_signal(selector, seeds):
    empty, hit = 0, 0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((200, 50))
        d = continuous_design(X)
        if selector(d, rng.standard_normal(200), seed) == frozenset():
            empty += 1
        if 0 in selector(d, 10 * X[:, 0] + 0.1 * rng.standard_normal(200), seed):
            hit += 1
    return empty, hit


def _cv(d, y, s):
    return select_by_cv(d, y, rng=s).groups


def _bic(d, y, s):
    return select_by_bic(d, y).groups


@pytest.fixture(scope="module")
def monte_carlo():
    return {"cv": _null_signal(_cv, range(100)), "bic": _null_signal(_bic, range(100))}


@pytest.mark.slow
@pytest.mark.parametrize("name", ["cv", "bic"])
def test_signal_group_always_selected(monte_carlo, name):
    assert monte_carlo[name][1] == 100


# Unpenalized-refit BIC keeps the empty model only when no noise column has
# chi2_1 > log(200); over 50 columns that happens about a third of the time.
# Minimum-CV-error tuning is similarly permissive. Kept as strict xfails so a
# behaviour change is noticed.
@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="min-error tuning admits noise groups more than 10% of the time")
@pytest.mark.parametrize("name", ["cv", "bic"])
def test_pure_noise_selects_nothing_ninety_percent(monte_carlo, name):
    assert monte_carlo[name][0] >= 90


@pytest.mark.slow
def test_bic_null_rate_near_chi_square_prediction(monte_carlo):
    from scipy.stats import chi2
    predicted = 100 * chi2.cdf(math.log(200), 1) ** 50
    assert abs(monte_carlo["bic"][0] - predicted) <= 15


def test_bic_leave_one_out_style_oracle():
    # BIC of each distinct active set, recomputed directly from its OLS fit
    from oracles import bic_brute
    d, y = kkt_instance(4)
    path = fit_path(d, y)
    sel = select_by_bic(d, y, path=path)
    scores = []
    for k in range(len(path)):
        cols = d.columns_of(path.active(k))
        scores.append(math.inf if cols.size >= d.n - 1 else bic_brute(d.matrix, y, cols))
    assert sel.index == int(np.argmin(scores))
    assert sel.score == pytest.approx(min(scores), rel=1e-10)


def test_model_of_size():
    d, y = kkt_instance(5)
    path = fit_path(d, y)
    sizes = [len(path.active(k)) for k in range(len(path))]
    for s in set(sizes):
        got = model_of_size(path, s)
        assert len(got) == s
        assert got == path.active(sizes.index(s))
    assert model_of_size(path, d.n_groups + 1) is None
