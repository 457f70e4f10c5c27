"""Regime-switching vector autoregression for very-short-term wind forecasting.

Subpackages
-----------
data
    Panel and mode time series, CSV I/O and hour dummies.
regimes
    Field standardisation, PCA, self-organising map and k-means mode grouping.
models
    Model specs, design matrices, OLS fitting and rolling forecasts.
evaluation
    Scores, blocked cross-validation and report tables.
synth
    Synthetic regime-switching panels with known parameters.
"""

__version__ = "0.1.0"

from .data import ModeSeries, PanelSeries, align, load_mode_csv, load_panel_csv, write_mode_csv, write_panel_csv
from .exceptions import (
    AlignmentError,
    CvarWindError,
    DomainError,
    InsufficientDataError,
    ParseError,
    ValidationError,
)
from .models import Family, FittedModelSet, ModelSpec, RegimeVAR, fit, forecast, rolling_forecast
from .regimes import ModeClassifier

__all__ = [
    "AlignmentError",
    "CvarWindError",
    "DomainError",
    "Family",
    "FittedModelSet",
    "InsufficientDataError",
    "ModeClassifier",
    "ModeSeries",
    "ModelSpec",
    "PanelSeries",
    "ParseError",
    "RegimeVAR",
    "ValidationError",
    "__version__",
    "align",
    "fit",
    "forecast",
    "load_mode_csv",
    "load_panel_csv",
    "rolling_forecast",
    "write_mode_csv",
    "write_panel_csv",
]
