"""Minimal NIfTI-1 reader/writer for 3D scalar grids.

Covers the subset this project needs: single-file .nii / .nii.gz, little- or
big-endian headers, the common datatypes, and voxel spacing from pixdim.
Orientation matrices are ignored; data is returned in on-disk index order.
"""

from __future__ import annotations

import gzip
import struct

import numpy as np

HEADER_SIZE = 348
VOX_OFFSET = 352

_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


class NiftiError(Exception):
    pass


def _open(path: str, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def read_nifti(path: str) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Read a 3D NIfTI-1 file; returns (data, spacing)."""
    with _open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise NiftiError(f"{path}: file shorter than NIfTI-1 header")

    endian = "<"
    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr != HEADER_SIZE:
        endian = ">"
        (sizeof_hdr,) = struct.unpack_from(">i", raw, 0)
        if sizeof_hdr != HEADER_SIZE:
            raise NiftiError(f"{path}: bad sizeof_hdr, not a NIfTI-1 file")

    magic = raw[344:348]
    if magic[:3] not in (b"n+1", b"ni1"):
        raise NiftiError(f"{path}: bad magic {magic!r}")

    dim = struct.unpack_from(endian + "8h", raw, 40)
    (datatype,) = struct.unpack_from(endian + "h", raw, 70)
    pixdim = struct.unpack_from(endian + "8f", raw, 76)
    (vox_offset,) = struct.unpack_from(endian + "f", raw, 108)
    scl_slope, scl_inter = struct.unpack_from(endian + "2f", raw, 112)

    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise NiftiError(f"{path}: bad ndim {ndim}")
    shape = tuple(int(d) for d in dim[1:1 + ndim])
    if any(d > 1 for d in shape[3:]):
        raise NiftiError(f"{path}: only 3D volumes supported, got shape {shape}")
    shape = (shape + (1, 1, 1))[:3]

    if datatype not in _DTYPES:
        raise NiftiError(f"{path}: unsupported datatype code {datatype}")
    dtype = np.dtype(_DTYPES[datatype]).newbyteorder(endian)

    offset = int(vox_offset) if vox_offset else VOX_OFFSET
    count = int(np.prod(shape))
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    # NIfTI stores the first index fastest
    data = data.reshape(shape, order="F")
    data = np.asarray(data, dtype=data.dtype.newbyteorder("="))

    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        data = data.astype(np.float32) * (scl_slope or 1.0) + scl_inter

    spacing = tuple(float(abs(p)) or 1.0 for p in pixdim[1:4])
    return data, spacing


def write_nifti(path: str, data: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> None:
    """Write a 3D array as single-file NIfTI-1 (.nii or .nii.gz)."""
    data = np.ascontiguousarray(data)
    if data.ndim != 3:
        raise NiftiError(f"only 3D volumes supported, got shape {data.shape}")
    if data.dtype not in _CODES:
        data = data.astype(np.float32)

    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, data.shape[0], data.shape[1], data.shape[2], 1, 1, 1, 1)
    struct.pack_into("<h", header, 70, _CODES[data.dtype])
    struct.pack_into("<h", header, 72, data.dtype.itemsize * 8)
    struct.pack_into("<8f", header, 76, 1.0, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", header, 108, float(VOX_OFFSET))
    struct.pack_into("<2f", header, 112, 1.0, 0.0)
    header[344:348] = b"n+1\x00"

    with _open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(b"\x00" * (VOX_OFFSET - HEADER_SIZE))
        fh.write(data.tobytes(order="F"))
