"""Estimating the number of clusters with statistical error control."""

from .data import CenteredMatrix, DataMatrix, center_rows, load_csv, save_csv
from .estimator import CluStErrResult, EstimatorConfig, TestRecord, TestTrace, pvalue_curve, run
from .exceptions import (ConfigError, CSVParseError, CluStErrError, DataError, DegenerateNoiseError,
                         UndefinedRescalingError)
from .kmeans import Partition, SeedSet, choose_seeds, kmeans, lloyd
from .noise import NoiseEstimate, SegmentBoundaries, estimate_noise
from .null import NullDistribution, blocked_quantile, chi2_rescaled_cdf, max_quantile
from .simulation import DesignSpec, ReplicationReport, generate, reference_signals, replicate

__version__ = "0.1.0"

__all__ = [
    "CenteredMatrix", "CluStErrError", "CluStErrResult", "ConfigError", "CSVParseError", "DataError",
    "DataMatrix", "DegenerateNoiseError", "DesignSpec", "EstimatorConfig", "NoiseEstimate",
    "NullDistribution", "Partition", "ReplicationReport", "SeedSet", "SegmentBoundaries", "TestRecord",
    "TestTrace", "UndefinedRescalingError", "blocked_quantile", "center_rows", "chi2_rescaled_cdf",
    "choose_seeds", "estimate_noise", "generate", "kmeans", "lloyd", "load_csv", "max_quantile",
    "reference_signals", "pvalue_curve", "replicate", "run", "save_csv",
]
