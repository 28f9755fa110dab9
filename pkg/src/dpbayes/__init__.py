"""Differentially private Bayesian hypothesis tests built on truncated Bayes
factors of z, t, chi-squared and F statistics."""

from .bayesfactor import (
    Family,
    NonLocalScale,
    ScalePolicy,
    StatisticObservation,
    TruncationParams,
    combined_bf,
    log_truncated_bf,
    ratio_chi2,
    ratio_f,
    ratio_t,
    ratio_z,
    truncated_bf,
)
from .calibration import CalibrationSpec, PowerSurface, calibrate_cutoff, estimate_power, tune_hyperparams
from .estimator import PrivateBayesFactorTest, PrivateTestTuner
from .mechanism import PrivacyConfig, PrivateTestOutcome, decide, make_partition, privatize, sensitivity

__version__ = "0.1.0"

__all__ = [
    "CalibrationSpec",
    "Family",
    "NonLocalScale",
    "PowerSurface",
    "PrivacyConfig",
    "PrivateBayesFactorTest",
    "PrivateTestOutcome",
    "PrivateTestTuner",
    "ScalePolicy",
    "StatisticObservation",
    "TruncationParams",
    "calibrate_cutoff",
    "combined_bf",
    "decide",
    "estimate_power",
    "log_truncated_bf",
    "make_partition",
    "privatize",
    "ratio_chi2",
    "ratio_f",
    "ratio_t",
    "ratio_z",
    "sensitivity",
    "truncated_bf",
    "tune_hyperparams",
]
