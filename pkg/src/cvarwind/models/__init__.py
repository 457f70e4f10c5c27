"""Model family, design matrices, least squares and forecasting."""

from .design import DesignSet, build_design, design_features
from .estimator import RegimeVAR
from .fitting import FittedModelSet, fit
from .forecasting import (
    FORECAST_COLUMNS,
    Forecast,
    forecast,
    forecast_rows,
    read_forecast_csv,
    rolling_forecast,
    write_forecast_csv,
)
from .ols import OLSInfo, ols_fit, ols_solve
from .spec import Family, ModelSpec

__all__ = [
    "FORECAST_COLUMNS",
    "DesignSet",
    "Family",
    "FittedModelSet",
    "Forecast",
    "ModelSpec",
    "OLSInfo",
    "RegimeVAR",
    "build_design",
    "design_features",
    "fit",
    "forecast",
    "forecast_rows",
    "ols_fit",
    "ols_solve",
    "read_forecast_csv",
    "rolling_forecast",
    "write_forecast_csv",
]
