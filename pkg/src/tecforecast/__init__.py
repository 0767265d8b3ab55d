"""Convolutional recurrent forecasting of global ionospheric TEC maps."""

from .architectures import REFERENCE_PARAM_COUNTS, ArchKind, Model, build_model, count_params, model_step
from .forecaster import ForecastScheme, periodic_baseline, predict, reference_frame, reference_index

__all__ = [
    "REFERENCE_PARAM_COUNTS", "ArchKind", "ForecastScheme", "Model", "build_model", "count_params", "model_step",
    "periodic_baseline", "predict", "reference_frame", "reference_index",
]
