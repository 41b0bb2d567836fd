"""End-to-end QC run: mask, DVARS variants, flags, report."""

from __future__ import annotations

import logging

import numpy as np

from . import __version__
from .dvars_core import (
    VoxelNoiseParams,
    dvars,
    dvars_standardized,
    dvars_voxel_standardized,
    estimate_noise_params,
)
from .errors import DvarsError
from .qc import DEFAULT_POLICY, FlagPolicy, QcReport, flag_outliers, summarize
from .volume import DEFAULT_MASK_STRATEGY, Mask, MaskStrategy, TimeSeriesVolume, derive_mask, nonconstant_mask

log = logging.getLogger(__name__)

ALL_VARIANTS = ("raw", "star", "star_star")
ASSUMPTIONS = [
    "voxel noise is AR(1) around a constant mean",
    "spatiotemporal noise correlation is separable (not verified)",
]


def compute_report(
    v: TimeSeriesVolume,
    mask: Mask | None = None,
    mask_strategy: MaskStrategy | str = DEFAULT_MASK_STRATEGY,
    robust_sigma: bool = True,
    detrend: bool = False,
    variants=ALL_VARIANTS,
    policy: FlagPolicy = DEFAULT_POLICY,
    params: VoxelNoiseParams | None = None,
    input_path: str | None = None,
) -> QcReport:
    """Compute the requested DVARS variants and flags for one volume.

    Raw DVARS always uses the full mask; the standardized variants use the
    mask minus constant voxels, minus any voxel whose noise parameters could
    not be estimated. If no parameters can be estimated at all, the
    standardized columns are left empty and a warning is recorded. Flags
    are computed from DVARS* whenever a policy is active.
    """
    variants = tuple(variants)
    warnings: list[str] = []
    if mask is None:
        mask = derive_mask(v, mask_strategy)
        mask_desc = str(mask_strategy)
    else:
        mask_desc = mask.description or "user mask"

    raw = dvars(v, mask)
    star = star_star = None
    noise_meta = None
    need_star = "star" in variants or policy.kind != "none"
    if need_star or "star_star" in variants:
        try:
            if params is None:
                params = estimate_noise_params(v, mask & nonconstant_mask(v), robust_sigma, detrend)
            else:
                keep = mask.included[params.voxels]
                params = VoxelNoiseParams(
                    params.voxels[keep], params.sigma[keep], params.rho[keep], params.dims,
                    params.robust_sigma, params.detrend, params.source, params.excluded,
                )
            noise_meta = params.meta()
            if need_star:
                star = dvars_standardized(v, mask, params)
            if "star_star" in variants:
                star_star = dvars_voxel_standardized(v, mask, params)
                noise_meta["n_excluded_star_star"] = star_star.excluded
        except DvarsError as exc:
            warnings.append(f"standardized variants skipped: {exc}")
            star = star_star = None

    if star is not None:
        result = flag_outliers(star, policy)
        flags, used = result.flags, result.policy
        if result.warning:
            warnings.append(result.warning)
    else:
        flags, used = np.zeros(len(raw), dtype=bool), policy
        if policy.kind != "none":
            warnings.append("no DVARS* series available; no frames flagged")

    for w in warnings:
        log.warning(w)

    report = QcReport(
        raw.values,
        star.values if star is not None and "star" in variants else None,
        star_star.values if star_star is not None else None,
        flags,
    )
    report.meta = {
        "tool": "dvarskit",
        "version": __version__,
        "input": input_path if input_path is not None else v.source,
        "mask": mask_desc,
        "I": mask.count,
        "T": v.n_frames,
        "estimator": {"robust_sigma": robust_sigma, "detrend": detrend},
        "noise_params": noise_meta,
        "variants": list(variants),
        "flag_policy": str(policy),
        "flag_policy_applied": str(used),
        "flag_series": "dvars_star",
        "assumptions": ASSUMPTIONS,
        "warnings": warnings,
    }
    report.summary = summarize(report)
    return report
