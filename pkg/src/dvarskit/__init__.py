"""Standardized DVARS for 4D volumetric time series."""

__version__ = "0.1.0"

from .errors import (
    DegenerateInputError,
    DvarsError,
    EmptyMaskError,
    GeometryMismatchError,
    InvalidInputError,
    NiftiError,
)
from .stats import (
    ar1_coeff,
    detrend_linear,
    diff_variance_predicted,
    quantile,
    robust_sd_iqr,
    sample_sd,
)
from .volume import Mask, TimeSeriesVolume, derive_mask
from .dvars_core import (
    DvarsSeries,
    VoxelNoiseParams,
    dvars,
    dvars_standardized,
    dvars_voxel_standardized,
    estimate_noise_params,
    expected_dvars_sq,
)
from .simulate import SimulationSpec, inject_drift, inject_spike, simulate_ar1_volume
from .qc import FlagPolicy, QcReport, flag_outliers
from .pipeline import compute_report

__all__ = [
    "DegenerateInputError",
    "DvarsError",
    "DvarsSeries",
    "EmptyMaskError",
    "FlagPolicy",
    "GeometryMismatchError",
    "InvalidInputError",
    "Mask",
    "NiftiError",
    "QcReport",
    "SimulationSpec",
    "TimeSeriesVolume",
    "VoxelNoiseParams",
    "ar1_coeff",
    "compute_report",
    "derive_mask",
    "detrend_linear",
    "diff_variance_predicted",
    "dvars",
    "dvars_standardized",
    "dvars_voxel_standardized",
    "estimate_noise_params",
    "expected_dvars_sq",
    "flag_outliers",
    "inject_drift",
    "inject_spike",
    "quantile",
    "robust_sd_iqr",
    "sample_sd",
    "simulate_ar1_volume",
]
