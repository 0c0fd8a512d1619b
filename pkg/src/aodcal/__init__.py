"""Regional/temporal Bayesian downscaling of gridded AOD to daily PM2.5.

Fits a coregionalized Gaussian-process + random-walk calibration model per
(climate region, 4-month window) block by MCMC, predicts gridded surfaces
with full posterior uncertainty, and evaluates by random and spatial
cross-validation.
"""

__version__ = "0.1.0"

from .errors import AodcalError, InputError, NumericalError
from .geo import haversine_km
from .mcmc import ChainConfig, PosteriorDraws, PriorConfig, run_chain, summarize
from .partition import assign_blocks
from .randomwalk import interpolate_missing_days, rw1_structure, sample_rw1_conditional
from .spatialcov import build_covariance, kriging, taper_weight
from .synthetic import TruthSpec, simulate
from .transform import TransformSpec, apply_transform, fit_transform
from .types import (
    BlockSpec,
    GridCellDay,
    MonitorRecord,
    RegionId,
    SiteId,
    TemporalWindow,
    windows_for_year,
)
from .validation import coverage_check, cross_validate, make_folds, regression_metrics

__all__ = [
    "AodcalError", "InputError", "NumericalError",
    "haversine_km", "assign_blocks",
    "TransformSpec", "fit_transform", "apply_transform",
    "build_covariance", "kriging", "taper_weight",
    "rw1_structure", "sample_rw1_conditional", "interpolate_missing_days",
    "ChainConfig", "PriorConfig", "PosteriorDraws", "run_chain", "summarize",
    "TruthSpec", "simulate",
    "make_folds", "regression_metrics", "coverage_check", "cross_validate",
    "SiteId", "MonitorRecord", "GridCellDay", "RegionId", "TemporalWindow",
    "BlockSpec", "windows_for_year",
]
