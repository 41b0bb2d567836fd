"""DVARS and its standardized variants.

For frames t = 2..T, with D[i, t] = Y[i, t] - Y[i, t-1] over masked voxels:

* ``dvars``: sqrt(mean_i D**2)
* ``dvars_standardized``: dvars / sqrt(mean_i 2 (1 - rho_i) sigma_i**2)
* ``dvars_voxel_standardized``: sqrt(mean_i D**2 / (2 (1 - rho_i) sigma_i**2))

The AR(1) null model makes the expected square of both standardized
variants one. All per-frame voxel sums go through
`parallel.canonical_row_sums`, which makes results independent of voxel
order and of thread count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import stats
from .errors import DegenerateInputError, InvalidInputError
from .parallel import canonical_row_sums, map_row_blocks
from .volume import Mask, TimeSeriesVolume, check_geometry

log = logging.getLogger(__name__)

VARIANTS = ("raw", "star", "star_star")
DIFF_VAR_REL_EPS = 1e-12


@dataclass(frozen=True)
class DvarsSeries:
    """One DVARS variant for frames 2..T (`frames` holds the 1-based frame numbers)."""

    variant: str
    values: np.ndarray
    n_voxels: int
    excluded: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown DVARS variant {self.variant!r}")
        vals = np.asarray(self.values, dtype=np.float64)
        if np.any(~np.isfinite(vals)) or np.any(vals < 0):
            raise InvalidInputError("DVARS values must be finite and nonnegative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def frames(self) -> np.ndarray:
        return np.arange(2, len(self.values) + 2)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class VoxelNoiseParams:
    """Per-voxel AR(1) noise parameters over an effective set of voxels.

    `voxels` are flat voxel indices; `excluded` lists masked voxels whose
    parameters could not be estimated. ``diff_var == 2 (1 - rho) sigma**2``
    holds exactly because it is always computed here.
    """

    voxels: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    dims: tuple[int, int, int]
    robust_sigma: bool | None = None
    detrend: bool = False
    source: str = "estimated"
    excluded: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    diff_var: np.ndarray = field(init=False)

    def __post_init__(self):
        voxels = np.asarray(self.voxels, dtype=np.intp)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        rho = np.asarray(self.rho, dtype=np.float64)
        if not (voxels.shape == sigma.shape == rho.shape) or voxels.ndim != 1:
            raise InvalidInputError("voxels, sigma and rho must be 1D arrays of equal length")
        if voxels.size == 0:
            raise DegenerateInputError("no voxel has usable noise parameters")
        object.__setattr__(self, "voxels", voxels)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "excluded", np.asarray(self.excluded, dtype=np.intp))
        object.__setattr__(self, "diff_var", stats.diff_variance_predicted(sigma, rho))

    @property
    def count(self) -> int:
        return int(self.voxels.size)

    def effective_mask(self) -> Mask:
        return Mask.from_indices(self.voxels, self.dims, "effective")

    def meta(self) -> dict:
        return {
            "sigma_estimator": (
                "iqr/1.349" if self.robust_sigma else "sample sd" if self.robust_sigma is not None else "true"
            ),
            "rho_estimator": "standard lag-1 autocorrelation (not robust)"
            if self.source == "estimated" else "true",
            "detrend": self.detrend,
            "n_voxels": self.count,
            "n_excluded": int(self.excluded.size),
        }


def _frame_differences(v: TimeSeriesVolume, voxels: np.ndarray) -> np.ndarray:
    """(T-1, n_voxels) C-contiguous array of successive differences."""
    sub = v.data[voxels]
    return np.ascontiguousarray((sub[:, 1:] - sub[:, :-1]).T)


def _check_mask(v: TimeSeriesVolume, m: Mask) -> np.ndarray:
    check_geometry(v.dims, m.dims, "volume", "mask")
    m.require_nonempty()
    return m.indices


def _rms_rows(d: np.ndarray) -> np.ndarray:
    return np.sqrt(canonical_row_sums(d * d) / d.shape[1])


def dvars(v: TimeSeriesVolume, m: Mask) -> DvarsSeries:
    """Root mean square over masked voxels of the frame-to-frame difference.

    The mean difference is not subtracted.
    """
    voxels = _check_mask(v, m)
    return DvarsSeries("raw", _rms_rows(_frame_differences(v, voxels)), voxels.size)


def estimate_noise_params(v: TimeSeriesVolume, m: Mask, robust_sigma: bool = True,
                          detrend: bool = False) -> VoxelNoiseParams:
    """Estimate sigma_i and rho_i for each masked voxel.

    Detrending (if requested) only feeds the estimates; DVARS itself is
    always computed on the untouched data. Voxels with a constant (or, when
    detrending, affine) series are dropped and listed in ``excluded``.
    """
    voxels = _check_mask(v, m)
    min_frames = 4 if detrend else 3
    if v.n_frames < min_frames:
        raise InvalidInputError(
            f"estimating noise parameters needs T >= {min_frames}"
            f"{' with detrending' if detrend else ''}, got T = {v.n_frames}"
        )
    data = v.data

    def block(s: slice) -> np.ndarray:
        raw = data[voxels[s]]
        x = stats.detrend_linear(raw) if detrend else raw
        sig = stats.robust_sd_iqr(x) if robust_sigma else stats.sample_sd(x)
        rho, bad = stats.ar1_coeff_rows(x, reference=raw)
        return np.column_stack([sig, rho, bad])

    out = map_row_blocks(block, voxels.size)
    bad = out[:, 2].astype(bool)
    if bad.all():
        raise DegenerateInputError(
            "all masked voxels are constant; noise parameters cannot be estimated"
        )
    if bad.any():
        log.info("excluded %d degenerate voxel(s) from noise estimation", int(bad.sum()))
    return VoxelNoiseParams(
        voxels[~bad],
        out[~bad, 0],
        out[~bad, 1],
        v.dims,
        robust_sigma=robust_sigma,
        detrend=detrend,
        excluded=voxels[bad],
    )


def expected_dvars_sq(p: VoxelNoiseParams) -> float:
    """Null expectation of DVARS squared: mean of the per-voxel difference variances."""
    return float(canonical_row_sums(p.diff_var[None, :])[0] / p.count)


def _params_voxels(v: TimeSeriesVolume, m: Mask, p: VoxelNoiseParams) -> np.ndarray:
    check_geometry(v.dims, p.dims, "volume", "noise parameters")
    check_geometry(v.dims, m.dims, "volume", "mask")
    if not np.all(m.included[p.voxels]):
        raise InvalidInputError("noise parameters cover voxels outside the mask")
    return p.voxels


def dvars_standardized(v: TimeSeriesVolume, m: Mask, p: VoxelNoiseParams) -> DvarsSeries:
    """DVARS divided by its null root mean square (sqrt of `expected_dvars_sq`).

    Both numerator and denominator run over the voxels in `p`.
    """
    voxels = _params_voxels(v, m, p)
    expected = expected_dvars_sq(p)
    if not expected > 0:
        raise DegenerateInputError("null variance is zero; check mask/estimators")
    raw = _rms_rows(_frame_differences(v, voxels))
    return DvarsSeries("star", raw / np.sqrt(expected), voxels.size)


def dvars_voxel_standardized(v: TimeSeriesVolume, m: Mask, p: VoxelNoiseParams) -> DvarsSeries:
    """RMS over voxels of differences scaled by each voxel's predicted difference SD.

    Voxels with ``diff_var <= 1e-12 * median(diff_var)`` are left out; the
    number left out is reported in ``excluded``.
    """
    voxels = _params_voxels(v, m, p)
    eps = DIFF_VAR_REL_EPS * float(np.median(p.diff_var))
    keep = p.diff_var > eps
    if not keep.any():
        raise DegenerateInputError("every voxel has zero predicted difference variance")
    n_drop = int((~keep).sum())
    if n_drop:
        log.info("excluded %d voxel(s) with zero predicted difference variance", n_drop)
    d = _frame_differences(v, voxels[keep])
    d /= np.sqrt(p.diff_var[keep])[None, :]
    return DvarsSeries("star_star", _rms_rows(d), int(keep.sum()), excluded=n_drop)
