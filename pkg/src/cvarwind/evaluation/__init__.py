"""Forecast scoring, blocked cross-validation and report tables."""

from .crossval import CVResult, FoldPlan, cross_validate, cross_validate_design, cv_residuals, make_folds
from .scoring import attach_actuals, error_distribution, improvement, rmse, site_average

__all__ = [
    "CVResult",
    "FoldPlan",
    "attach_actuals",
    "cross_validate",
    "cross_validate_design",
    "cv_residuals",
    "error_distribution",
    "improvement",
    "make_folds",
    "rmse",
    "site_average",
]
