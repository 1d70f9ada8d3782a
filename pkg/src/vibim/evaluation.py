"""Interaction-selection accuracy, selection instability and VIF screening."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .encoding import GroupedDesign

__all__ = [
    "InteractionScore",
    "fg_measure",
    "StabilityScore",
    "SelectorFailure",
    "pivs",
    "sivs",
    "pivs_many",
    "sivs_many",
    "VifResult",
    "vif",
    "VIF_FLAG",
]

VIF_FLAG = 4.0

# selector(design, response, rng) -> iterable of selected terms (or group ids)
Selector = Callable[[GroupedDesign, np.ndarray, np.random.Generator], Iterable]


class SelectorFailure(RuntimeError):
    """Raised by a selector that cannot produce a model on some replicate."""


def _pair(t) -> tuple:
    a, b = (int(v) for v in t)
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class InteractionScore:
    f: float
    g: float
    selected: frozenset
    truth: frozenset


def fg_measure(selected: Iterable, truth: Iterable) -> InteractionScore:
    """F (harmonic) and G (geometric) mean of interaction precision and recall.

    Only 2-element terms are counted; main effects in either set are ignored.
    """
    s = frozenset(_pair(t) for t in selected if len(t) == 2)
    t = frozenset(_pair(x) for x in truth if len(x) == 2)
    if not s and not t:
        return InteractionScore(1.0, 1.0, s, t)
    if not s or not t:
        return InteractionScore(0.0, 0.0, s, t)
    hit = len(s & t)
    return InteractionScore(2.0 * hit / (len(s) + len(t)), hit / math.sqrt(len(s) * len(t)), s, t)


@dataclass(frozen=True)
class StabilityScore:
    """Mean symmetric-difference size over the replicates that succeeded."""

    value: float
    kind: str
    level: float
    replications: int
    failures: int
    differences: tuple

    @property
    def pivs(self) -> float:
        return self.value if self.kind == "pivs" else math.nan

    @property
    def sivs(self) -> float:
        return self.value if self.kind == "sivs" else math.nan


def _finish(kind, level, diffs, failures) -> StabilityScore:
    value = float(np.mean(diffs)) if diffs else math.nan
    return StabilityScore(value, kind, float(level), len(diffs), failures, tuple(diffs))


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _scores(kind, level, diffs: dict, failures: int) -> dict:
    return {k: _finish(kind, level, v, failures) for k, v in diffs.items()}


def _as_sets(selection) -> dict:
    if isinstance(selection, Mapping):
        return {k: frozenset(v) for k, v in selection.items()}
    return {None: frozenset(selection)}


def _instability(kind, level, selector, design, y, reps, rng, baseline, make_replicate) -> dict:
    base = _as_sets(selector(design, y, rng) if baseline is None else baseline)
    diffs = {k: [] for k in base}
    failures = 0
    for child in rng.spawn(reps):
        d_rep, y_rep = make_replicate(child)
        try:
            sel = _as_sets(selector(d_rep, y_rep, child))
        except SelectorFailure:
            failures += 1
            continue
        for k in base:
            diffs[k].append(len(sel[k] ^ base[k]))
    return _scores(kind, level, diffs, failures)


def pivs_many(selector: Selector, design: GroupedDesign, response, tau: float, reps: int,
              rng=None, sigma_hat: float | None = None, baseline=None) -> dict:
    """:func:`pivs` for a selector returning a mapping of named selections."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    y = np.asarray(response, dtype=float)
    rng = _rng(rng)
    if sigma_hat is None:
        sigma_hat = _full_model_sigma(design, y)

    def replicate(child):
        return design, y + tau * sigma_hat * child.standard_normal(y.size)

    return _instability("pivs", tau, selector, design, y, reps, rng, baseline, replicate)


def sivs_many(selector: Selector, design: GroupedDesign, response, removal_fraction: float,
              reps: int, rng=None, baseline=None) -> dict:
    """:func:`sivs` for a selector returning a mapping of named selections."""
    if not 0 <= removal_fraction < 1:
        raise ValueError("removal_fraction must lie in [0, 1)")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    y = np.asarray(response, dtype=float)
    rng = _rng(rng)
    n = y.size
    drop = int(math.floor(removal_fraction * n))
    if drop == 0:
        base = _as_sets(selector(design, y, rng) if baseline is None else baseline)
        return _scores("sivs", removal_fraction, {k: [0] * reps for k in base}, 0)

    def replicate(child):
        keep = np.sort(child.permutation(n)[drop:])
        return design.take_rows(keep), y[keep]

    return _instability("sivs", removal_fraction, selector, design, y, reps, rng, baseline, replicate)


def pivs(selector: Selector, design: GroupedDesign, response, tau: float, reps: int,
         rng=None, sigma_hat: float | None = None, baseline: Iterable | None = None) -> StabilityScore:
    """Perturbation instability: ``y + tau * sigma_hat * e`` with standard normal ``e``.

    ``sigma_hat`` defaults to the residual scale of the full main-effects OLS
    fit; pass it explicitly when that fit is not estimable. Every replicate
    gets its own child generator, used for both the noise and the selector.
    """
    return pivs_many(selector, design, response, tau, reps, rng, sigma_hat, baseline)[None]


def sivs(selector: Selector, design: GroupedDesign, response, removal_fraction: float, reps: int,
         rng=None, baseline: Iterable | None = None) -> StabilityScore:
    """Subsampling instability: drop ``floor(fraction * n)`` random rows and reselect."""
    return sivs_many(selector, design, response, removal_fraction, reps, rng, baseline)[None]


def _full_model_sigma(design: GroupedDesign, y: np.ndarray) -> float:
    from .regression import fit_ols

    fit = fit_ols(design, np.arange(design.n_columns), y)
    s2 = fit.sigma2_hat
    if not np.isfinite(s2) or fit.degenerate:
        raise ValueError("full model is not estimable; pass sigma_hat explicitly")
    return math.sqrt(s2)


@dataclass(frozen=True)
class VifResult:
    columns: tuple
    values: tuple

    @property
    def flagged(self) -> tuple:
        return tuple(c for c, v in zip(self.columns, self.values) if v > VIF_FLAG)

    def as_dict(self) -> dict:
        return dict(zip(self.columns, self.values))


def vif(design_or_matrix, columns: Sequence[int] | None = None) -> VifResult:
    """Variance inflation of each column given the others plus an intercept.

    Exact collinearity gives ``inf`` rather than an error.
    """
    X = getattr(design_or_matrix, "matrix", design_or_matrix)
    X = np.asarray(X, dtype=float)
    cols = tuple(range(X.shape[1])) if columns is None else tuple(int(c) for c in columns)
    A = X[:, cols] - X[:, cols].mean(axis=0)
    values = []
    for k in range(len(cols)):
        target = A[:, k]
        tss = float(target @ target)
        if len(cols) == 1:
            values.append(1.0)
            continue
        if tss == 0.0:
            values.append(math.inf)
            continue
        others = np.delete(A, k, axis=1)
        coef, *_ = np.linalg.lstsq(others, target, rcond=None)
        resid = target - others @ coef
        r2 = 1.0 - float(resid @ resid) / tss
        values.append(math.inf if r2 >= 1.0 - 1e-12 else 1.0 / (1.0 - r2))
    return VifResult(cols, tuple(values))
