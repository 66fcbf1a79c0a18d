"""Post-hoc probability calibration with a prospect-theory reporting correction."""

__version__ = "0.1.0"

from .calibrate import (
    BinningModel,
    BinningWithPlatt,
    IdentityModel,
    IsotonicModel,
    PlattModel,
    TemperatureModel,
    apply_binning,
    apply_calibrator,
    apply_isotonic,
    apply_platt,
    apply_temperature,
    calibrate_dataset,
    fit_binning,
    fit_binning_with_platt,
    fit_calibrator,
    fit_isotonic,
    fit_platt,
    fit_temperature,
)
from .core import Dataset, PtcalError, ScoredSample, SplitSpec, split_dataset, validate_probability
from .metrics import evaluate
from .pt import PTParams, pt_inverse, pt_weight, roundtrip_report, validate_gamma

__all__ = [
    "apply_binning",
    "apply_calibrator",
    "apply_isotonic",
    "apply_platt",
    "apply_temperature",
    "BinningModel",
    "BinningWithPlatt",
    "calibrate_dataset",
    "Dataset",
    "evaluate",
    "fit_binning",
    "fit_binning_with_platt",
    "fit_calibrator",
    "fit_isotonic",
    "fit_platt",
    "fit_temperature",
    "IdentityModel",
    "IsotonicModel",
    "PlattModel",
    "pt_inverse",
    "pt_weight",
    "PtcalError",
    "PTParams",
    "roundtrip_report",
    "ScoredSample",
    "split_dataset",
    "SplitSpec",
    "TemperatureModel",
    "validate_gamma",
    "validate_probability",
]
