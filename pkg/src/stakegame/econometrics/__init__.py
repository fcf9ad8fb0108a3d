from .estimators import (OLS, EstimationError, RegressionResult, TwoStageLeastSquares,
                         collinear_columns, ols, sandwich, tsls)
from .panel import (FORK_DATES, ModelSpec, Panel, PanelError, event_dummies, fit_spec, load_panel,
                    transform, weekly_mean)

__all__ = [
    "OLS", "TwoStageLeastSquares", "RegressionResult", "EstimationError", "ols", "tsls", "sandwich",
    "collinear_columns", "Panel", "PanelError", "ModelSpec", "load_panel", "transform",
    "weekly_mean", "event_dummies", "fit_spec", "FORK_DATES",
]
