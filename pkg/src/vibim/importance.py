"""Candidate model sets, BIC-p model weights and SOIL importance scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .encoding import GroupedDesign
from .regression import CriterionValue, OlsFit, criteria, fit_ols
from .solvers import DEFAULT_SPECS, PenaltySpec, SolverPath, fit_path

__all__ = [
    "CandidateModel",
    "ModelSet",
    "ImportanceVector",
    "candidates_from_sets",
    "assemble_candidates",
    "bicp_weights",
    "soil",
    "soil_importance",
]


@dataclass(frozen=True, eq=False)
class CandidateModel:
    groups: frozenset
    columns: np.ndarray
    fit: OlsFit
    criterion: CriterionValue

    @property
    def size(self) -> int:
        return int(self.columns.size)


@dataclass(frozen=True, eq=False)
class ModelSet:
    """Deduplicated candidate models; ``weights`` is ``None`` until weighted."""

    design: GroupedDesign
    models: tuple
    weights: np.ndarray | None = None
    psi: float | None = None
    provenance: tuple = ()

    def __len__(self) -> int:
        return len(self.models)

    @property
    def group_sets(self) -> list:
        return [m.groups for m in self.models]


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    """SOIL score per group of ``design``; groups not scored hold NaN."""

    scores: np.ndarray
    psi: float
    design: GroupedDesign
    provenance: tuple = ()

    def __getitem__(self, group: int) -> float:
        return float(self.scores[group])

    def as_dict(self) -> dict:
        return {g: float(s) for g, s in enumerate(self.scores) if np.isfinite(s)}

    def ranking(self) -> list:
        """Scored groups by descending score, ties by ascending group index."""
        idx = np.flatnonzero(np.isfinite(self.scores))
        order = np.lexsort((idx, -self.scores[idx]))
        return [int(g) for g in idx[order]]


def candidates_from_sets(design: GroupedDesign, response, group_sets: Iterable,
                         psi: float = 1.0, provenance: Sequence[str] = ()) -> ModelSet:
    """OLS refit and criteria for each distinct group set, in first-seen order.

    Sets spanning ``n - 1`` or more columns are skipped: their BIC is not
    defined with an intercept and a positive residual.
    """
    y = np.asarray(response, dtype=float)
    p_star = design.n_columns
    seen, models = set(), []
    for gs in group_sets:
        gs = frozenset(int(g) for g in gs)
        if gs in seen:
            continue
        seen.add(gs)
        cols = design.columns_of(gs)
        if cols.size >= design.n - 1:
            continue
        fit = fit_ols(design, cols, y)
        models.append(CandidateModel(gs, cols, fit, criteria(fit, cols.size, p_star, psi)))
    return ModelSet(design, tuple(models), None, None, tuple(provenance))


def assemble_candidates(design: GroupedDesign, response,
                        specs: Sequence[PenaltySpec] = DEFAULT_SPECS,
                        psi: float = 1.0,
                        paths: Sequence[SolverPath] | None = None) -> ModelSet:
    """Pool the active sets of every step of every path, plus the null model."""
    y = np.asarray(response, dtype=float)
    if paths is None:
        paths = [fit_path(design, y, spec) for spec in specs]
    sets = [frozenset()]
    for path in paths:
        sets.extend(path.active_sets)
    provenance = tuple(p.spec.family.value for p in paths)
    return candidates_from_sets(design, y, sets, psi, provenance)


def bicp_weights(models: ModelSet, psi: float = 1.0) -> ModelSet:
    """Weights proportional to ``exp(-BIC/2 - psi * C_M)``, normalized in log space."""
    if psi <= 0:
        raise ValueError("psi must be positive")
    if not models.models:
        raise ValueError("empty model set")
    expo = np.array([-0.5 * m.criterion.bic - psi * m.criterion.c_m for m in models.models])
    w = np.exp(expo - expo.max())
    w /= w.sum()
    return ModelSet(models.design, models.models, w, psi, models.provenance)


def soil(models: ModelSet, target_groups: Iterable[int] | None = None) -> ImportanceVector:
    """Sum of the weights of models containing every column of each target group."""
    if models.weights is None:
        raise ValueError("model set is not weighted")
    design = models.design
    targets = range(design.n_groups) if target_groups is None else sorted(set(target_groups))
    member = np.zeros((len(models), design.n_columns), dtype=bool)
    for k, m in enumerate(models.models):
        member[k, m.columns] = True
    scores = np.full(design.n_groups, np.nan)
    for g in targets:
        contains = member[:, design.groups[g]].all(axis=1)
        scores[g] = min(1.0, float(models.weights[contains].sum()))
    return ImportanceVector(scores, models.psi, design, models.provenance)


def soil_importance(design: GroupedDesign, response, psi: float = 1.0,
                    specs: Sequence[PenaltySpec] = DEFAULT_SPECS) -> tuple[ImportanceVector, ModelSet]:
    """Candidate harvesting, weighting and scoring in one call."""
    weighted = bicp_weights(assemble_candidates(design, response, specs, psi), psi)
    return soil(weighted), weighted
