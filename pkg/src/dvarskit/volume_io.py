"""Loading volumes and masks from disk, and saving volumes back."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, NiftiError
from .nifti import read_nifti, write_nifti
from .volume import Mask, TimeSeriesVolume, check_geometry

_SPLIT = re.compile(r"[\t,]")


def load_nifti(path) -> TimeSeriesVolume:
    """Load a 4D NIfTI-1 time series (``.nii`` or ``.nii.gz``)."""
    img = read_nifti(path)
    nx, ny, nz, nt = img.array.shape
    if nt < 2:
        raise NiftiError(f"{path}: time dimension < 2 (T = {nt}); DVARS needs at least two frames")
    if not np.all(np.isfinite(img.array)):
        raise NiftiError(f"{path}: data contain NaN or infinite values")
    # [x, y, z, t] in Fortran order == voxel index x-fastest
    data = img.array.reshape(nx * ny * nz, nt, order="F")
    return TimeSeriesVolume(
        data,
        (nx, ny, nz),
        voxel_sizes=img.pixdim[1:4],
        tr=img.tr,
        source=str(path),
    )


def save_nifti(v: TimeSeriesVolume, path, dtype="f4", byteorder="<") -> None:
    """Write a volume as a single-file NIfTI-1."""
    arr = v.data.reshape(v.dims + (v.n_frames,), order="F")
    write_nifti(path, arr, v.voxel_sizes or (1.0, 1.0, 1.0), v.tr, dtype=dtype, byteorder=byteorder)


def load_mask(path, expected_dims) -> Mask:
    """Load a 3D NIfTI-1 mask; a voxel is included iff its value is > 0."""
    img = read_nifti(path)
    shape = img.array.shape
    if shape[3] != 1:
        raise NiftiError(f"{path}: mask must be 3D, got {shape[3]} frames")
    check_geometry(expected_dims, shape[:3], "volume", "mask")
    mask = Mask(img.array[..., 0].ravel(order="F") > 0, shape[:3], f"file:{path}")
    return mask.require_nonempty()


def load_tsv_matrix(path) -> TimeSeriesVolume:
    """Load a voxels-by-frames text matrix (tab or comma separated).

    Geometry is ``(n_rows, 1, 1)`` with no voxel sizes.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InvalidInputError(f"{path}: file not found") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"{path}: cannot read ({exc})") from None

    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = _SPLIT.split(line.strip())
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise InvalidInputError(f"{path}: row {lineno} has a non-numeric field") from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise InvalidInputError(
                f"{path}: row {lineno} has {len(values)} columns, expected {width} (ragged rows)"
            )
        rows.append(values)
    if not rows:
        raise InvalidInputError(f"{path}: empty matrix file")
    if width < 2:
        raise InvalidInputError(f"{path}: time dimension < 2 (T = {width})")
    data = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"{path}: matrix contains NaN or infinite values")
    return TimeSeriesVolume(data, (data.shape[0], 1, 1), source=str(path))


def load_volume(path) -> TimeSeriesVolume:
    """Dispatch on file name: NIfTI for ``.nii``/``.nii.gz``/``.hdr``, otherwise text matrix."""
    name = str(path).lower()
    if name.endswith((".nii", ".nii.gz", ".hdr", ".hdr.gz")):
        return load_nifti(path)
    return load_tsv_matrix(path)
