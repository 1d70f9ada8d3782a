"""Least-squares refits on column subsets and the information criteria."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "OlsFit",
    "CriterionValue",
    "OlsInference",
    "fit_ols",
    "criteria",
    "complexity",
    "ols_inference",
]


def _matrix(design) -> np.ndarray:
    return design.matrix if hasattr(design, "matrix") else np.asarray(design, dtype=float)


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Intercept plus least-squares coefficients on a column subset.

    ``df`` counts the intercept plus the numerical rank of the centred
    column block, so aliased columns do not inflate it.
    """

    intercept: float
    columns: np.ndarray
    coef: np.ndarray
    rss: float
    tss: float
    n: int
    rank: int

    @property
    def df(self) -> int:
        return self.rank + 1

    @property
    def degenerate(self) -> bool:
        """True when no residual degrees of freedom remain."""
        return self.n <= self.df

    @property
    def sigma2_hat(self) -> float:
        return self.rss / (self.n - self.df) if self.n > self.df else math.nan

    @property
    def coefficients(self) -> dict:
        return {int(c): float(b) for c, b in zip(self.columns, self.coef)}

    def predict(self, design) -> np.ndarray:
        X = _matrix(design)
        return self.intercept + X[:, self.columns] @ self.coef


@dataclass(frozen=True)
class CriterionValue:
    aic: float
    bic: float
    c_m: float
    aic_p: float
    bic_p: float


def fit_ols(design, columns, response) -> OlsFit:
    """Least squares of ``response`` on an intercept and ``columns``.

    Columns are centred first, so the intercept is never shrunk; the slope
    vector is the minimum-norm solution from an SVD-based solver, which
    keeps rank-deficient subsets well defined.
    """
    X = _matrix(design)
    y = np.asarray(response, dtype=float)
    n = y.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("response must be finite")
    cols = np.asarray(sorted(set(int(c) for c in np.atleast_1d(columns))), dtype=np.int64)
    ybar = y.mean()
    yc = y - ybar
    tss = float(yc @ yc)
    if cols.size == 0:
        return OlsFit(ybar, cols, np.empty(0), tss, tss, n, 0)
    Xs = X[:, cols]
    xbar = Xs.mean(axis=0)
    Xc = Xs - xbar
    beta, _, rank, _ = np.linalg.lstsq(Xc, yc, rcond=None)
    resid = yc - Xc @ beta
    rss = float(resid @ resid)
    return OlsFit(float(ybar - xbar @ beta), cols, beta, rss, tss, n, int(rank))


def complexity(model_columns: int, p_star: int) -> float:
    """Descriptive-complexity term ``k log(e p*/k) + 2 log(k + 2)``; ``2 log 2`` at k=0."""
    k = int(model_columns)
    if k < 0 or k > p_star:
        raise ValueError(f"model size {k} outside [0, {p_star}]")
    if k == 0:
        return 2.0 * math.log(2.0)
    return k * (1.0 + math.log(p_star / k)) + 2.0 * math.log(k + 2)


def criteria(fit: OlsFit, model_columns: int, p_star: int, psi: float = 1.0) -> CriterionValue:
    """AIC, BIC and their complexity-penalised variants for one fit.

    Uses the profile Gaussian form ``n log(rss/n) + penalty * df``. The rss
    is floored at ``1e-12 * tss`` so saturated fits stay finite.
    """
    if psi <= 0:
        raise ValueError("psi must be positive")
    n = fit.n
    floor = max(1e-12 * fit.tss, np.finfo(float).tiny)
    loglik = n * math.log(max(fit.rss, floor) / n)
    aic = loglik + 2.0 * fit.df
    bic = loglik + fit.df * math.log(n)
    c_m = complexity(model_columns, p_star)
    return CriterionValue(aic, bic, c_m, aic + 2 * psi * c_m, bic + 2 * psi * c_m)


@dataclass(frozen=True, eq=False)
class OlsInference:
    """Classical t-based inference; entry 0 is the intercept."""

    columns: np.ndarray
    estimate: np.ndarray
    std_error: np.ndarray
    t_value: np.ndarray
    p_value: np.ndarray
    sigma2_hat: float
    df_resid: int


def ols_inference(design, columns, response) -> OlsInference:
    """Coefficients with standard errors and two-sided t-test p-values.

    Aliased coefficients (rank deficiency) get NaN standard errors.
    """
    fit = fit_ols(design, columns, response)
    X = _matrix(design)
    n = fit.n
    A = np.column_stack([np.ones(n), X[:, fit.columns]])
    est = np.concatenate([[fit.intercept], fit.coef])
    df_resid = n - fit.df
    k = A.shape[1]
    se = np.full(k, np.nan)
    if df_resid > 0:
        s2 = fit.rss / df_resid
        if fit.rank == fit.columns.size:
            cov = s2 * np.linalg.inv(A.T @ A)
            se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = est / se
        t = np.where((se == 0) & (est != 0), np.copysign(np.inf, est), t)
    p = 2.0 * stats.t.sf(np.abs(t), df_resid) if df_resid > 0 else np.full(k, np.nan)
    return OlsInference(fit.columns, est, se, t, p, fit.sigma2_hat, df_resid)
