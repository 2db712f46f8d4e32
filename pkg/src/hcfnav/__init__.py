"""Hybrid adaptive INS/DVL navigation filter with learned process noise."""

from .eskf import DvlMeasurement, ErrorFilterState, ProcessNoiseSpec, dvl_update, propagate
from .features import Window, extract_features, extract_features_batch
from .strapdown import ImuSample, NavState, inverse_mechanize, mechanize
from .trees import TreeEnsemble, evaluate_mse, fit_ensemble, fit_tree, predict

__version__ = "0.1.0"

__all__ = [
    "DvlMeasurement",
    "ErrorFilterState",
    "ImuSample",
    "NavState",
    "ProcessNoiseSpec",
    "TreeEnsemble",
    "Window",
    "dvl_update",
    "evaluate_mse",
    "extract_features",
    "extract_features_batch",
    "fit_ensemble",
    "fit_tree",
    "inverse_mechanize",
    "mechanize",
    "predict",
    "propagate",
]
