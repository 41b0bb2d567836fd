"""In-memory 4D volumes, voxel masks and mask derivation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMaskError, GeometryMismatchError, InvalidInputError


@dataclass(frozen=True)
class TimeSeriesVolume:
    """Voxel-major samples ``data[i, t]`` on an ``nx * ny * nz`` grid.

    Voxel index ``i`` runs x-fastest (``i = x + nx * (y + ny * z)``), the NIfTI
    on-disk order. `data` is float64, C-contiguous and made read-only.
    """

    data: np.ndarray
    dims: tuple[int, int, int]
    voxel_sizes: tuple[float, float, float] | None = None
    tr: float | None = None
    source: str = ""

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise InvalidInputError(f"spatial dims must be three positive integers, got {self.dims}")
        if data.ndim != 2:
            raise InvalidInputError(f"volume data must be 2D (voxels, frames), got {data.ndim}D")
        if data.shape[0] != dims[0] * dims[1] * dims[2]:
            raise InvalidInputError(
                f"{data.shape[0]} voxel rows do not match dims {dims} "
                f"({dims[0] * dims[1] * dims[2]} voxels)"
            )
        if data.shape[1] < 2:
            raise InvalidInputError(f"time dimension < 2 (T = {data.shape[1]})")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("volume contains NaN or infinite values")
        if data is self.data:
            data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", dims)

    @property
    def n_voxels(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "TimeSeriesVolume":
        """Same geometry and provenance, new samples."""
        return TimeSeriesVolume(data, self.dims, self.voxel_sizes, self.tr, self.source)


@dataclass(frozen=True)
class Mask:
    """Boolean inclusion flag per spatial voxel."""

    included: np.ndarray
    dims: tuple[int, int, int]
    description: str = field(default="", compare=False)

    def __post_init__(self):
        inc = np.array(self.included, dtype=bool).ravel()
        dims = tuple(int(d) for d in self.dims)
        if inc.size != dims[0] * dims[1] * dims[2]:
            raise InvalidInputError(f"mask has {inc.size} entries but dims {dims}")
        inc.flags.writeable = False
        object.__setattr__(self, "included", inc)
        object.__setattr__(self, "dims", dims)

    @property
    def count(self) -> int:
        return int(self.included.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.included)

    @classmethod
    def from_indices(cls, indices, dims, description: str = "") -> "Mask":
        inc = np.zeros(int(np.prod(dims)), dtype=bool)
        inc[np.asarray(indices, dtype=np.intp)] = True
        return cls(inc, dims, description)

    def __and__(self, other: "Mask") -> "Mask":
        check_geometry(self.dims, other.dims, "mask", "mask")
        return Mask(self.included & other.included, self.dims, f"{self.description}&{other.description}")

    def require_nonempty(self) -> "Mask":
        if self.count == 0:
            raise EmptyMaskError("mask includes no voxels; use a looser mask or strategy")
        return self


def check_geometry(expected, actual, expected_name="volume", actual_name="mask") -> None:
    """Raise `GeometryMismatchError` listing every differing dimension."""
    expected = tuple(int(d) for d in expected)
    actual = tuple(int(d) for d in actual)
    if expected == actual:
        return
    if len(expected) != len(actual):
        raise GeometryMismatchError(f"{actual_name} has dims {actual}, {expected_name} has {expected}")
    parts = [
        f"{axis}: {actual_name} {a} vs {expected_name} {e}"
        for axis, e, a in zip("xyz", expected, actual)
        if e != a
    ]
    raise GeometryMismatchError("geometry mismatch (" + "; ".join(parts) + ")")


@dataclass(frozen=True)
class MaskStrategy:
    """One of ``all``, ``nonzero-mean``, ``mean-frac=F`` or ``nonconstant``."""

    kind: str
    fraction: float | None = None

    def __str__(self) -> str:
        if self.kind == "mean-frac":
            return f"mean-frac={self.fraction:g}"
        return self.kind


DEFAULT_MASK_STRATEGY = MaskStrategy("mean-frac", 0.1)

_FRAC_RE = re.compile(r"^mean-frac(?:tion)?[=(:]\s*([^)\s]+)\s*\)?$")


def parse_mask_strategy(text: str) -> MaskStrategy:
    text = text.strip()
    if text in ("all", "nonzero-mean", "nonconstant"):
        return MaskStrategy(text)
    m = _FRAC_RE.match(text)
    if m:
        try:
            f = float(m.group(1))
        except ValueError:
            f = float("nan")
        if not 0.0 < f < 1.0:
            raise InvalidInputError(f"mean-frac fraction must lie in (0, 1), got {m.group(1)!r}")
        return MaskStrategy("mean-frac", f)
    raise InvalidInputError(
        f"unknown mask strategy {text!r}; expected all, nonzero-mean, mean-frac=F or nonconstant"
    )


def nonconstant_mask(v: TimeSeriesVolume) -> Mask:
    """Voxels whose time series is not constant."""
    d = v.data
    return Mask(np.ptp(d, axis=1) > 0, v.dims, "nonconstant")


def derive_mask(v: TimeSeriesVolume, strategy: MaskStrategy | str = DEFAULT_MASK_STRATEGY) -> Mask:
    """Build a mask from the data alone.

    ``mean-frac=F`` keeps voxels whose temporal mean is at least F times the
    average of all positive voxel means. An empty result raises
    `EmptyMaskError`.
    """
    if isinstance(strategy, str):
        strategy = parse_mask_strategy(strategy)
    means = v.data.mean(axis=1)
    if strategy.kind == "all":
        inc = np.ones(v.n_voxels, dtype=bool)
    elif strategy.kind == "nonzero-mean":
        inc = means != 0
    elif strategy.kind == "mean-frac":
        positive = means[means > 0]
        if positive.size == 0:
            raise EmptyMaskError(
                f"mask strategy {strategy} found no voxel with a positive mean; "
                "try --mask-strategy all or nonconstant"
            )
        inc = means >= strategy.fraction * np.sort(positive).mean()
    elif strategy.kind == "nonconstant":
        inc = nonconstant_mask(v).included
    else:
        raise InvalidInputError(f"unknown mask strategy {strategy.kind!r}")
    mask = Mask(inc, v.dims, str(strategy))
    if mask.count == 0:
        raise EmptyMaskError(
            f"mask strategy {strategy} selected no voxels; try a looser strategy such as 'all'"
        )
    return mask
