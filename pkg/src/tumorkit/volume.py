"""Voxel-grid data model: geometry, exclusive label codes, channel masks.

Label volumes hold a single integer code per voxel (0 background, 1 T2H,
2 ET, 3 CC).  The whole-tumour (WT) view is always derived as the union
of the three channels and never stored on disk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BACKGROUND = 0
CHANNEL_CODES = {"T2H": 1, "ET": 2, "CC": 3}
CHANNELS = ("T2H", "ET", "CC")
REPORT_CHANNELS = ("T2H", "ET", "CC", "WT")
VALID_CODES = (0, 1, 2, 3)
SEQUENCES = ("T1", "T1-C", "T2", "FLAIR")

# Absolute tolerance on affine entries when deciding two volumes share a grid.
AFFINE_COMPAT_ATOL = 1e-3


class LabelCodeError(ValueError):
    """A label array contains codes outside {0, 1, 2, 3}."""


class GeometryMismatchError(ValueError):
    """Cross-volume operation on incompatible voxel grids."""


@dataclass(frozen=True)
class VolumeGeometry:
    """Grid shape, physical spacing (mm per voxel), and index->world affine."""

    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    affine: np.ndarray

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        spacing = tuple(float(s) for s in self.spacing)
        if len(shape) != 3 or any(n < 1 for n in shape):
            raise ValueError(f"shape must be three positive integers, got {self.shape!r}")
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be three positive reals, got {self.spacing!r}")
        affine = np.array(self.affine, dtype=np.float64)
        if affine.shape != (4, 4):
            raise ValueError(f"affine must be 4x4, got shape {affine.shape}")
        col_norms = np.linalg.norm(affine[:3, :3], axis=0)
        if not np.allclose(col_norms, spacing, rtol=1e-4, atol=0.0):
            raise ValueError(
                f"spacing {spacing} disagrees with affine column norms {tuple(col_norms)}"
            )
        affine.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", affine)

    @classmethod
    def from_affine(cls, shape, affine) -> "VolumeGeometry":
        """Geometry with spacing derived from the affine column norms."""
        affine = np.asarray(affine, dtype=np.float64)
        spacing = tuple(float(s) for s in np.linalg.norm(affine[:3, :3], axis=0))
        return cls(tuple(shape), spacing, affine)

    @classmethod
    def isotropic(cls, shape, spacing_mm: float = 1.0) -> "VolumeGeometry":
        s = float(spacing_mm)
        return cls(tuple(shape), (s, s, s), np.diag([s, s, s, 1.0]))

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz

    @property
    def voxel_volume_ml(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz / 1000.0

    def compatible_with(self, other: "VolumeGeometry", atol: float = AFFINE_COMPAT_ATOL) -> bool:
        """Same grid: equal shape and affine entries within ``atol``."""
        return self.shape == other.shape and bool(
            np.all(np.abs(self.affine - other.affine) <= atol)
        )


def require_compatible(a: VolumeGeometry, b: VolumeGeometry) -> None:
    if not a.compatible_with(b):
        raise GeometryMismatchError(
            f"incompatible geometries: shape {a.shape} vs {b.shape}, "
            f"max affine delta {float(np.max(np.abs(a.affine - b.affine))):.3g}"
        )


@dataclass(frozen=True)
class LabelVolume:
    """Mutually exclusive integer-coded segmentation on a voxel grid."""

    geometry: VolumeGeometry
    codes: np.ndarray

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.shape != self.geometry.shape:
            raise ValueError(f"codes shape {codes.shape} != geometry shape {self.geometry.shape}")
        if not np.issubdtype(codes.dtype, np.integer):
            raise LabelCodeError(f"label codes must be integers, got dtype {codes.dtype}")
        bad = np.setdiff1d(np.unique(codes), VALID_CODES)
        if bad.size:
            raise LabelCodeError(f"label codes outside {{0,1,2,3}}: {bad.tolist()}")
        codes = np.ascontiguousarray(codes, dtype=np.uint8)
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)


@dataclass(frozen=True)
class IntensityVolume:
    """Scalar image volume for one MRI sequence."""

    geometry: VolumeGeometry
    values: np.ndarray
    sequence_tag: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.geometry.shape:
            raise ValueError(f"values shape {values.shape} != geometry shape {self.geometry.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("intensity values must be finite")
        if self.sequence_tag not in SEQUENCES:
            raise ValueError(f"sequence_tag must be one of {SEQUENCES}, got {self.sequence_tag!r}")
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class BinaryMask:
    """Boolean per-voxel view derived from a LabelVolume channel."""

    geometry: VolumeGeometry
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.shape != self.geometry.shape:
            raise ValueError(f"mask shape {bits.shape} != geometry shape {self.geometry.shape}")
        bits = np.ascontiguousarray(bits, dtype=bool)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def population(self) -> int:
        return int(np.count_nonzero(self.bits))


def channel_mask(vol: LabelVolume, channel: str) -> BinaryMask:
    """Mask of the voxels carrying one channel's code."""
    if channel not in CHANNEL_CODES:
        raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")
    return BinaryMask(vol.geometry, vol.codes == CHANNEL_CODES[channel])


def whole_tumour_mask(vol: LabelVolume) -> BinaryMask:
    """Union of all three channels (every non-background voxel)."""
    return BinaryMask(vol.geometry, vol.codes != BACKGROUND)


def mask_volume_ml(mask: BinaryMask) -> float:
    """Mask population converted to millilitres via the voxel size."""
    sx, sy, sz = mask.geometry.spacing
    return mask.population * sx * sy * sz / 1000.0
