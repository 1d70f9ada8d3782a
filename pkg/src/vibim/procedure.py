"""Variable-importance-based interaction modeling and two-stage baselines.

The procedure scores main effects with SOIL, screens those scoring above
``threshold_c``, adds all pairwise interactions among the screened set,
re-scores the augmented design, builds nested models from the ranking and
brackets the plausible ones between the BIC and AIC minimizers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .encoding import EncodingError, GroupedDesign, augment_interactions
from .importance import ImportanceVector, ModelSet, soil_importance
from .regression import CriterionValue, OlsFit, criteria, fit_ols, ols_inference
from .solvers import (
    DEFAULT_SPECS,
    PenaltySpec,
    Selection,
    SolverPath,
    fit_path,
    model_of_size,
    select_by_bic,
    select_by_cv,
)

__all__ = [
    "EmptyDesign",
    "VibimConfig",
    "NestedModel",
    "VibimReport",
    "run_vibim",
    "nested_model_table",
    "coefficient_table",
    "TwoStageResult",
    "two_stage",
]


class EmptyDesign(EncodingError):
    """The design has no groups or too few rows."""


@dataclass(frozen=True)
class VibimConfig:
    """Tuning of the procedure.

    ``high_dim_criteria=None`` switches to AIC-p/BIC-p narrowing when the
    augmented design has at least ``n`` columns.
    """

    psi: float = 1.0
    threshold_c: float = 1e-4
    max_rank_K: int = 15
    high_dim_criteria: bool | None = None
    specs: tuple = DEFAULT_SPECS
    rng_seed: int | None = None

    def __post_init__(self):
        if not 0 < self.threshold_c < 1:
            raise ValueError("threshold_c must lie in (0, 1)")
        if self.max_rank_K < 1:
            raise ValueError("max_rank_K must be >= 1")
        if self.psi <= 0:
            raise ValueError("psi must be positive")
        object.__setattr__(self, "specs", tuple(self.specs))


@dataclass(frozen=True, eq=False)
class NestedModel:
    size: int
    groups: tuple
    fit: OlsFit
    criterion: CriterionValue


@dataclass(frozen=True, eq=False)
class VibimReport:
    config: VibimConfig
    design: GroupedDesign
    stage1_importance: ImportanceVector
    screened: tuple
    stage2_importance: ImportanceVector
    ranking: tuple
    nested_models: tuple
    window: tuple
    high_dim: bool
    response: np.ndarray = field(repr=False, default=None)
    stage1_models: ModelSet = field(repr=False, default=None)
    stage2_models: ModelSet = field(repr=False, default=None)

    @property
    def lower(self) -> int:
        return self.window[0]

    @property
    def upper(self) -> int:
        return self.window[1]

    @property
    def plausible_models(self) -> tuple:
        return self.nested_models[self.window[0] - 1 : self.window[1]]

    def model(self, s: int) -> NestedModel:
        """Nested model with ``s`` groups (1-based)."""
        return self.nested_models[s - 1]

    def top_terms(self, s: int) -> frozenset:
        """Terms of the ``s`` highest-ranked groups (not capped at ``K``)."""
        return self.design.terms_of(self.ranking[:s])

    def selected_labels(self, s: int) -> list:
        return [self.design.labels[g] for g in self.ranking[:s]]


def _nested_length(design: GroupedDesign, ranking: Sequence[int], K: int) -> int:
    limit = design.n / 2
    total, s = 0, 0
    for g in ranking[: min(K, len(ranking))]:
        total += len(design.groups[g])
        if total > limit:
            break
        s += 1
    return max(s, 1)


def run_vibim(design: GroupedDesign, response, config: VibimConfig = VibimConfig()) -> VibimReport:
    """Run the five steps on a main-effects design (interactions are ignored)."""
    y = np.asarray(response, dtype=float)
    if design.n_groups == 0:
        raise EmptyDesign("design has no groups")
    if design.n < 10:
        raise EmptyDesign("need at least 10 observations")
    if y.shape[0] != design.n:
        raise ValueError("response length does not match design rows")
    main = design.main_effects()
    psi = config.psi

    stage1, models1 = soil_importance(main, y, psi, config.specs)
    screened = tuple(g for g in range(main.n_groups) if stage1[g] > config.threshold_c)
    pairs = [(main.terms[a][0], main.terms[b][0]) for a, b in combinations(screened, 2)]
    if pairs:
        aug = augment_interactions(main, pairs)
        stage2, models2 = soil_importance(aug, y, psi, config.specs)
    else:
        aug, stage2, models2 = main, stage1, models1

    ranking = tuple(stage2.ranking())
    K = _nested_length(aug, ranking, config.max_rank_K)
    p_star = aug.n_columns
    nested = []
    for s in range(1, K + 1):
        groups = ranking[:s]
        cols = aug.columns_of(groups)
        fit = fit_ols(aug, cols, y)
        nested.append(NestedModel(s, groups, fit, criteria(fit, cols.size, p_star, psi)))

    high_dim = config.high_dim_criteria
    if high_dim is None:
        high_dim = p_star >= design.n
    if high_dim:
        bic = [m.criterion.bic_p for m in nested]
        aic = [m.criterion.aic_p for m in nested]
    else:
        bic = [m.criterion.bic for m in nested]
        aic = [m.criterion.aic for m in nested]
    L = int(np.argmin(bic)) + 1
    U = int(np.argmin(aic)) + 1
    return VibimReport(
        config=config,
        design=aug,
        stage1_importance=stage1,
        screened=screened,
        stage2_importance=stage2,
        ranking=ranking,
        nested_models=tuple(nested),
        window=(min(L, U), max(L, U)),
        high_dim=bool(high_dim),
        response=y,
        stage1_models=models1,
        stage2_models=models2,
    )


def nested_model_table(report: VibimReport) -> list:
    """One row per nested model: size, labels, criteria and window flag."""
    lo, hi = report.window
    rows = []
    for m in report.nested_models:
        rows.append({
            "size": m.size,
            "groups": [report.design.labels[g] for g in m.groups],
            "added": report.design.labels[m.groups[-1]],
            "bic": m.criterion.bic,
            "aic": m.criterion.aic,
            "bic_p": m.criterion.bic_p,
            "aic_p": m.criterion.aic_p,
            "in_window": lo <= m.size <= hi,
        })
    return rows


def coefficient_table(report: VibimReport, s: int) -> list:
    """OLS estimates with classical t-test p-values for nested model ``s``."""
    model = report.model(s)
    cols = report.design.columns_of(model.groups)
    inf = ols_inference(report.design, cols, report.response)
    names = ["(Intercept)"] + [report.design.column_labels[c] for c in inf.columns]
    return [
        {"term": name, "estimate": float(e), "std_error": float(se),
         "t_value": float(t), "p_value": float(p)}
        for name, e, se, t, p in zip(names, inf.estimate, inf.std_error, inf.t_value, inf.p_value)
    ]


@dataclass(frozen=True, eq=False)
class TwoStageResult:
    """Stage 1 picks main effects; stage 2 reselects among them and their pairs."""

    stage1: Selection
    stage2_design: GroupedDesign | None
    stage2_path: SolverPath | None
    stage2: Selection | None

    @property
    def selected_terms(self) -> frozenset:
        if self.stage2 is None:
            return frozenset()
        return self.stage2_design.terms_of(self.stage2.groups)

    def terms_of_size(self, s: int) -> frozenset:
        """Terms of a size-``s`` model from the stage-2 path.

        Falls back to the last path step when the path never reaches ``s``.
        """
        if self.stage2_path is None:
            return frozenset()
        groups = model_of_size(self.stage2_path, s)
        if groups is None:
            groups = self.stage2_path.active(len(self.stage2_path) - 1)
        return self.stage2_design.terms_of(groups)


def two_stage(design: GroupedDesign, response, spec: PenaltySpec, tuning: str = "cv",
              folds: int = 10, rng=None) -> TwoStageResult:
    """Two-stage penalized selection with ``tuning`` in ``{"cv", "bic"}``."""
    y = np.asarray(response, dtype=float)
    main = design.main_effects()
    rng = np.random.default_rng(rng)

    def select(d):
        if tuning == "cv":
            return select_by_cv(d, y, spec, folds=folds, rng=rng)
        if tuning == "bic":
            return select_by_bic(d, y, spec)
        raise ValueError(f"unknown tuning {tuning!r}")

    first = select(main)
    if not first.groups:
        return TwoStageResult(first, None, None, None)
    sub = main.select_groups(first.groups)
    mains = sorted(t[0] for t in sub.terms)
    stage2_design = augment_interactions(sub, combinations(mains, 2))
    if tuning == "bic":
        path = fit_path(stage2_design, y, spec)
        second = select_by_bic(stage2_design, y, spec, path=path)
    else:
        second = select(stage2_design)
        path = fit_path(stage2_design, y, spec)
    return TwoStageResult(first, stage2_design, path, second)
