"""Interaction selection for linear models by sparsity-oriented variable importance.

Main entry points: :func:`encode` builds a grouped design, :func:`run_vibim`
runs the procedure, :func:`soil_importance` scores groups and
:func:`fit_path` fits a group-penalized path.
"""

from .encoding import (
    GroupedDesign,
    Predictor,
    PredictorSchema,
    augment_interactions,
    encode,
)
from .evaluation import fg_measure, pivs, sivs, vif
from .importance import assemble_candidates, bicp_weights, soil, soil_importance
from .procedure import VibimConfig, VibimReport, nested_model_table, run_vibim, two_stage
from .regression import criteria, fit_ols
from .solvers import PenaltySpec, fit_path, lambda_grid, select_by_bic, select_by_cv

__version__ = "0.1.0"

__all__ = [
    "GroupedDesign",
    "Predictor",
    "PredictorSchema",
    "augment_interactions",
    "encode",
    "fg_measure",
    "pivs",
    "sivs",
    "vif",
    "assemble_candidates",
    "bicp_weights",
    "soil",
    "soil_importance",
    "VibimConfig",
    "VibimReport",
    "nested_model_table",
    "run_vibim",
    "two_stage",
    "criteria",
    "fit_ols",
    "PenaltySpec",
    "fit_path",
    "lambda_grid",
    "select_by_bic",
    "select_by_cv",
]
