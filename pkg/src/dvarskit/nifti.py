"""Minimal NIfTI-1 reader and writer.

Only the parts of the 348-byte header needed for 3D/4D scalar volumes are
interpreted: dim, datatype, bitpix, pixdim, vox_offset, scl_slope/scl_inter,
xyzt_units and magic. Single-file (``n+1``) and header/image pair (``ni1``)
layouts are read, optionally gzip-compressed; writing always produces a
single ``n+1`` file.
"""

from __future__ import annotations

import gzip
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NiftiError

HEADER_SIZE = 348
SINGLE_FILE_OFFSET = 352

# NIfTI-1 datatype code -> numpy dtype character
DATATYPES = {
    2: "u1",
    4: "i2",
    8: "i4",
    16: "f4",
    64: "f8",
}
DTYPE_CODES = {np.dtype(v).str[1:]: k for k, v in DATATYPES.items()}

_TIME_UNIT_SECONDS = {8: 1.0, 16: 1e-3, 24: 1e-6}


@dataclass(frozen=True)
class NiftiImage:
    """Decoded image: ``array`` is indexed ``[x, y, z, t]`` (Fortran order on disk)."""

    array: np.ndarray
    pixdim: tuple[float, ...]
    tr: float | None
    datatype: int


def _open_bytes(path: Path) -> bytes:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise NiftiError(f"{path}: file not found") from None
    except OSError as exc:
        raise NiftiError(f"{path}: cannot read ({exc.strerror})") from None
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise NiftiError(f"{path}: corrupt gzip stream ({exc})") from None
    return raw


def _endianness(hdr: bytes, path: Path) -> str:
    if len(hdr) < HEADER_SIZE:
        raise NiftiError(f"{path}: truncated header ({len(hdr)} of {HEADER_SIZE} bytes)")
    for order in "<>":
        if struct.unpack(order + "i", hdr[:4])[0] == HEADER_SIZE:
            return order
    raise NiftiError(f"{path}: not a NIfTI-1 file (sizeof_hdr is not 348)")


def read_nifti(path) -> NiftiImage:
    """Read a NIfTI-1 image and apply intensity scaling."""
    path = Path(path)
    raw = _open_bytes(path)
    order = _endianness(raw, path)
    magic = raw[344:348]
    if magic not in (b"n+1\0", b"ni1\0"):
        raise NiftiError(f"{path}: bad magic {magic!r}; expected 'n+1' or 'ni1'")

    dim = struct.unpack(order + "8h", raw[40:56])
    datatype, bitpix = struct.unpack(order + "2h", raw[70:74])
    pixdim = struct.unpack(order + "8f", raw[76:108])
    vox_offset, scl_slope, scl_inter = struct.unpack(order + "3f", raw[108:120])
    xyzt_units = raw[123]

    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise NiftiError(f"{path}: invalid dim[0] = {ndim}")
    if ndim > 4 and any(d > 1 for d in dim[5 : ndim + 1]):
        raise NiftiError(f"{path}: only scalar 3D/4D volumes are supported (dim[0] = {ndim})")
    shape = tuple(max(int(d), 1) for d in dim[1 : min(ndim, 4) + 1])
    shape = shape + (1,) * (4 - len(shape))
    if datatype not in DATATYPES:
        raise NiftiError(
            f"{path}: unsupported datatype code {datatype}; "
            "supported are uint8, int16, int32, float32, float64"
        )
    dtype = np.dtype(DATATYPES[datatype]).newbyteorder(order)

    if magic == b"ni1\0":
        img_path = path.with_name(path.name.replace(".hdr", ".img"))
        if img_path == path:
            raise NiftiError(f"{path}: 'ni1' header without a .hdr extension")
        data_bytes = _open_bytes(img_path)
        offset = int(vox_offset)
    else:
        data_bytes = raw
        offset = int(vox_offset) if vox_offset >= HEADER_SIZE else SINGLE_FILE_OFFSET

    count = int(np.prod(shape))
    needed = offset + count * dtype.itemsize
    if len(data_bytes) < needed:
        raise NiftiError(
            f"{path}: truncated data section ({len(data_bytes) - offset} bytes present, "
            f"{count * dtype.itemsize} expected)"
        )
    arr = np.frombuffer(data_bytes, dtype=dtype, count=count, offset=offset)
    arr = arr.reshape(shape, order="F").astype(np.float64)
    if scl_slope != 0 and np.isfinite(scl_slope):
        arr = arr * float(scl_slope) + float(scl_inter)

    tr = None
    if shape[3] > 1 and pixdim[4] > 0:
        tr = float(pixdim[4]) * _TIME_UNIT_SECONDS.get(xyzt_units & 0x38, 1.0)
    return NiftiImage(arr, tuple(float(p) for p in pixdim), tr, datatype)


def build_header(shape, dtype, voxel_sizes=(1.0, 1.0, 1.0), tr=None, order="<",
                 scl_slope=1.0, scl_inter=0.0, description="") -> bytes:
    """Pack a single-file NIfTI-1 header plus the 4-byte empty extension field."""
    dtype = np.dtype(dtype)
    code = DTYPE_CODES.get(dtype.str[1:])
    if code is None:
        raise NiftiError(f"cannot write datatype {dtype}")
    shape = tuple(int(s) for s in shape)
    ndim = len(shape)
    dim = (ndim,) + shape + (1,) * (7 - ndim)
    pixdim = [1.0] + [float(v) for v in voxel_sizes] + [float(tr or 0.0), 0.0, 0.0, 0.0]
    hdr = bytearray(HEADER_SIZE + 4)
    struct.pack_into(order + "i", hdr, 0, HEADER_SIZE)
    hdr[38] = ord("r")
    struct.pack_into(order + "8h", hdr, 40, *dim)
    struct.pack_into(order + "2h", hdr, 70, code, dtype.itemsize * 8)
    struct.pack_into(order + "8f", hdr, 76, *pixdim[:8])
    struct.pack_into(order + "3f", hdr, 108, float(SINGLE_FILE_OFFSET), scl_slope, scl_inter)
    hdr[123] = 2 | 8  # mm, seconds
    desc = description.encode("ascii", "replace")[:79]
    hdr[148 : 148 + len(desc)] = desc
    hdr[344:348] = b"n+1\0"
    return bytes(hdr)


def write_nifti(path, array, voxel_sizes=(1.0, 1.0, 1.0), tr=None, dtype="f4",
                byteorder="<", scl_slope=1.0, scl_inter=0.0, description="") -> None:
    """Write `array` (indexed ``[x, y, z(, t)]``) as a single-file NIfTI-1.

    A ``.gz`` suffix selects gzip compression with a zeroed timestamp, so the
    same input always produces the same bytes.
    """
    path = Path(path)
    dtype = np.dtype(dtype).newbyteorder(byteorder)
    arr = np.asarray(array)
    if np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        if arr.size and (arr.min() < info.min or arr.max() > info.max):
            raise NiftiError(f"values out of range for {dtype}")
    header = build_header(arr.shape, dtype, voxel_sizes, tr, byteorder, scl_slope, scl_inter, description)
    payload = header + arr.astype(dtype).tobytes(order="F")
    try:
        if path.suffix == ".gz":
            buf = io.BytesIO()
            with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0, filename="") as gz:
                gz.write(payload)
            payload = buf.getvalue()
        path.write_bytes(payload)
    except OSError as exc:
        raise NiftiError(f"{path}: cannot write ({exc.strerror})") from None
