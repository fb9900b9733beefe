"""Minimal NIfTI-1 codec for single-file volumes, plain or gzipped.

Supports exactly what the toolkit needs: 3D scalar volumes in the
single-file ``n+1`` layout with a 348-byte header.  Orientation is taken
from the sform when set, falling back to the qform quaternion, then to a
diagonal affine built from pixdim.  Volumes are kept in their native
index grid; no reorientation or resampling is performed.

Written files always carry an sform (code 1), mm units, and data in
Fortran voxel order at offset 352.  Label volumes are stored as uint8,
intensity volumes as float32.  Gzip output uses mtime 0 so identical
volumes produce identical bytes.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .volume import (
    IntensityVolume,
    LabelCodeError,
    LabelVolume,
    VolumeGeometry,
)

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"
GZIP_PREFIX = b"\x1f\x8b"

# 62 fields; see the NIfTI-1 header layout.
_HEADER_FMT = "i10s18sihcB8h3f4h8f3fhbB4f2i80s24s2h6f4f4f4f16s4s"
assert struct.calcsize("<" + _HEADER_FMT) == HEADER_SIZE

_DTYPE_BY_CODE = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    256: np.dtype(np.int8),
    512: np.dtype(np.uint16),
    768: np.dtype(np.uint32),
    1024: np.dtype(np.int64),
    1280: np.dtype(np.uint64),
}

DT_UINT8 = 2
DT_FLOAT32 = 16

NIFTI_XFORM_SCANNER_ANAT = 1
UNITS_MM = 2


class NiftiError(ValueError):
    """Malformed or unsupported NIfTI file."""


def _decompress_if_gzipped(raw: bytes) -> bytes:
    if raw[:2] == GZIP_PREFIX:
        return gzip.decompress(raw)
    return raw


def _byte_order(raw: bytes) -> str:
    """Detect endianness from sizeof_hdr; reject anything that is not 348."""
    if len(raw) < HEADER_SIZE:
        raise NiftiError(f"file too short for a NIfTI-1 header ({len(raw)} bytes)")
    for order in ("<", ">"):
        if struct.unpack(order + "i", raw[:4])[0] == HEADER_SIZE:
            return order
    raise NiftiError(f"header size field is not {HEADER_SIZE}; not a NIfTI-1 file")


def _qform_rotation(b: float, c: float, d: float) -> np.ndarray:
    a_sq = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a_sq) if a_sq > 0 else 0.0
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )


def _parse_header(raw: bytes):
    order = _byte_order(raw)
    fields = struct.unpack(order + _HEADER_FMT, raw[:HEADER_SIZE])
    magic = fields[-1]
    if magic == MAGIC_PAIR:
        raise NiftiError("two-file NIfTI (magic 'ni1') is not supported")
    if magic != MAGIC_SINGLE:
        raise NiftiError(f"wrong magic {magic!r}; expected {MAGIC_SINGLE!r}")

    dim = fields[7:15]
    ndim = dim[0]
    if ndim < 3 or any(d > 1 for d in dim[4 : 1 + max(ndim, 3)] if d):
        raise NiftiError(f"only 3D volumes supported, got dim {dim}")
    shape = tuple(int(d) for d in dim[1:4])
    if any(n < 1 for n in shape):
        raise NiftiError(f"non-positive dimensions in header: {shape}")

    datatype = fields[19]
    if datatype not in _DTYPE_BY_CODE:
        raise NiftiError(f"unsupported datatype code {datatype}")
    dtype = _DTYPE_BY_CODE[datatype].newbyteorder(order)

    pixdim = fields[22:30]
    vox_offset = int(fields[30])
    scl_slope, scl_inter = float(fields[31]), float(fields[32])

    qform_code, sform_code = fields[44], fields[45]
    quatern = [float(v) for v in fields[46:52]]
    srow = np.array(fields[52:64], dtype=np.float64).reshape(3, 4)

    if sform_code > 0:
        affine = np.vstack([srow, [0.0, 0.0, 0.0, 1.0]])
    elif qform_code > 0:
        qfac = -1.0 if pixdim[0] == -1.0 else 1.0
        rot = _qform_rotation(*quatern[:3])
        scales = np.array([pixdim[1], pixdim[2], qfac * pixdim[3]])
        affine = np.eye(4)
        affine[:3, :3] = rot * scales
        affine[:3, 3] = quatern[3:]
    else:
        spacing = [p if p > 0 else 1.0 for p in pixdim[1:4]]
        affine = np.diag([*spacing, 1.0])

    if np.any(np.linalg.norm(affine[:3, :3], axis=0) <= 0):
        raise NiftiError("degenerate affine: zero-length column")

    return shape, dtype, vox_offset, (scl_slope, scl_inter), affine


def _read_array(raw: bytes, shape, dtype, vox_offset, scaling) -> np.ndarray:
    count = int(np.prod(shape))
    need = vox_offset + count * dtype.itemsize
    if len(raw) < need:
        raise NiftiError(f"truncated data section: {len(raw)} bytes, need {need}")
    arr = np.frombuffer(raw, dtype=dtype, count=count, offset=vox_offset)
    arr = arr.reshape(shape, order="F")
    slope, inter = scaling
    if slope not in (0.0, 1.0) or inter != 0.0:
        if not (np.isfinite(slope) and np.isfinite(inter)):
            return arr
        arr = arr.astype(np.float64) * slope + inter
    return arr


def load_nifti(path, kind: str = "auto", sequence_tag: str | None = None):
    """Load a NIfTI-1 file as a LabelVolume or IntensityVolume.

    ``kind`` selects the interpretation: "label" validates codes against
    {0,1,2,3}, "intensity" requires a ``sequence_tag``, and "auto" treats
    integer-typed files as labels and float-typed files as intensities.
    """
    raw = _decompress_if_gzipped(Path(path).read_bytes())
    shape, dtype, vox_offset, scaling, affine = _parse_header(raw)
    arr = _read_array(raw, shape, dtype, vox_offset, scaling)
    geometry = VolumeGeometry.from_affine(shape, affine)

    if kind == "auto":
        kind = "label" if np.issubdtype(arr.dtype, np.integer) else "intensity"
    if kind == "label":
        if not np.issubdtype(arr.dtype, np.integer):
            rounded = np.rint(arr)
            if not np.array_equal(arr, rounded):
                raise LabelCodeError(f"non-integer values in label file {path}")
            arr = rounded.astype(np.int64)
        return LabelVolume(geometry, arr)
    if kind == "intensity":
        if sequence_tag is None:
            raise ValueError("sequence_tag is required when loading an intensity volume")
        return IntensityVolume(geometry, np.asarray(arr, dtype=np.float64), sequence_tag)
    raise ValueError(f"kind must be 'auto', 'label' or 'intensity', got {kind!r}")


def load_label(path) -> LabelVolume:
    return load_nifti(path, kind="label")


def load_intensity(path, sequence_tag: str) -> IntensityVolume:
    return load_nifti(path, kind="intensity", sequence_tag=sequence_tag)


def _build_header(geometry: VolumeGeometry, datatype: int, itemsize: int) -> bytes:
    nx, ny, nz = geometry.shape
    sx, sy, sz = geometry.spacing
    aff = geometry.affine
    return struct.pack(
        "<" + _HEADER_FMT,
        HEADER_SIZE,                      # sizeof_hdr
        b"", b"",                         # data_type, db_name (unused)
        0, 0, b"r", 0,                    # extents, session_error, regular, dim_info
        3, nx, ny, nz, 1, 1, 1, 1,        # dim
        0.0, 0.0, 0.0,                    # intent_p1..p3
        0,                                # intent_code
        datatype,
        itemsize * 8,                     # bitpix
        0,                                # slice_start
        1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0,  # pixdim (qfac first)
        float(VOX_OFFSET),
        1.0, 0.0,                         # scl_slope, scl_inter
        0, 0, UNITS_MM,                   # slice_end, slice_code, xyzt_units
        0.0, 0.0, 0.0, 0.0,               # cal_max, cal_min, slice_duration, toffset
        0, 0,                             # glmax, glmin
        b"", b"",                         # descrip, aux_file
        0, NIFTI_XFORM_SCANNER_ANAT,      # qform_code, sform_code
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,     # quatern_b..d, qoffset_x..z
        *(float(v) for v in aff[0]),      # srow_x
        *(float(v) for v in aff[1]),      # srow_y
        *(float(v) for v in aff[2]),      # srow_z
        b"",                              # intent_name
        MAGIC_SINGLE,
    )


def save_nifti(volume, path) -> None:
    """Write a LabelVolume (uint8) or IntensityVolume (float32) to disk.

    Gzip compression is chosen by suffix: paths ending in ``.gz`` are
    compressed, anything else is written plain.
    """
    if isinstance(volume, LabelVolume):
        data = np.asarray(volume.codes, dtype=np.uint8)
        datatype = DT_UINT8
    elif isinstance(volume, IntensityVolume):
        data = np.asarray(volume.values, dtype=np.float32)
        datatype = DT_FLOAT32
    else:
        raise TypeError(f"cannot save object of type {type(volume).__name__}")

    header = _build_header(volume.geometry, datatype, data.dtype.itemsize)
    payload = header + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + data.tobytes(order="F")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.name.endswith(".gz"):
        payload = gzip.compress(payload, compresslevel=6, mtime=0)
    path.write_bytes(payload)
