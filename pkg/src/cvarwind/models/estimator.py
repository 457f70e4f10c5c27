"""scikit-learn style wrapper around :func:`fit` and :func:`rolling_forecast`."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..data import DEFAULT_HOURS
from .fitting import fit
from .forecasting import forecast, rolling_forecast
from .spec import ModelSpec


class RegimeVAR(BaseEstimator):
    """Direct multi-horizon (conditional) VAR forecaster.

    ``fit`` takes a :class:`~cvarwind.data.PanelSeries` and, for mode-aware
    families, an aligned :class:`~cvarwind.data.ModeSeries`.

    Parameters
    ----------
    family : str, default="CVAR"
        One of Persistence, AR, ARX_Diurnal, ARX_Diurnal_ModeDummies, CAR,
        VAR, VAR_Diurnal, VAR_Diurnal_ModeDummies, CVAR.
    p : int, default=3
    horizons : tuple of int, default=(1, ..., 6)
    hours : tuple of int, default=(0, ..., 23)
    n_modes : int, default=1
    intercept : bool, default=True
    clamp : bool, default=True
        Clip negative forecasts at zero.
    n_jobs : int, default=1

    Attributes
    ----------
    model_ : FittedModelSet
    """

    def __init__(self, family="CVAR", p=3, horizons=(1, 2, 3, 4, 5, 6), hours=DEFAULT_HOURS,
                 n_modes=1, intercept=True, clamp=True, n_jobs=1):
        self.family = family
        self.p = p
        self.horizons = horizons
        self.hours = hours
        self.n_modes = n_modes
        self.intercept = intercept
        self.clamp = clamp
        self.n_jobs = n_jobs

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.family, self.p, self.horizons, self.hours, self.n_modes, self.intercept)

    def fit(self, panel, modes=None):
        self.model_ = fit(panel, modes, self.spec, n_jobs=self.n_jobs)
        return self

    def predict(self, panel, modes=None, window=None, horizons=None):
        """Rolling forecast records over ``window`` (see :func:`rolling_forecast`)."""
        check_is_fitted(self, "model_")
        return rolling_forecast(self.model_, panel, modes, window, horizons, self.clamp)

    def forecast(self, panel, modes, t, horizon):
        check_is_fitted(self, "model_")
        return forecast(self.model_, panel, modes, t, horizon, self.clamp)
