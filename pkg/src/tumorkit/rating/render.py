"""Slice rendering: windowed grayscale plus half-transparent overlays."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from ..volume import CHANNEL_CODES, IntensityVolume, LabelVolume

AXES = ("axial", "coronal", "sagittal")
# Grid axis whose index is fixed when slicing each view.
_AXIS_DIM = {"sagittal": 0, "coronal": 1, "axial": 2}

OVERLAY_COLORS = {
    "T2H": (0, 200, 80),
    "ET": (230, 60, 40),
    "CC": (60, 120, 255),
}
_OVERLAY_ALPHA = 0.5

# Robust display window: clamp the darkest/brightest half-percent.
_WINDOW_PERCENTILES = (0.5, 99.5)


def slice_counts(shape) -> dict[str, int]:
    return {axis: int(shape[_AXIS_DIM[axis]]) for axis in AXES}


def _take_slice(arr: np.ndarray, axis: str, index: int) -> np.ndarray:
    dim = _AXIS_DIM[axis]
    if not 0 <= index < arr.shape[dim]:
        raise IndexError(f"slice index {index} out of range for {axis} axis of size {arr.shape[dim]}")
    sl = np.take(arr, index, axis=dim)
    # Display with the later grid axis vertical, origin at the bottom.
    return sl.T[::-1]


def volume_window(vol: IntensityVolume) -> tuple[float, float]:
    lo, hi = np.percentile(vol.values, _WINDOW_PERCENTILES)
    if hi <= lo:
        hi = lo + 1.0
    return float(lo), float(hi)


def render_slice(
    vol: IntensityVolume,
    labels: LabelVolume | None,
    axis: str,
    index: int,
    overlay_channels=(),
    window: tuple[float, float] | None = None,
) -> bytes:
    """PNG bytes of one slice; deterministic for identical inputs."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    unknown = [c for c in overlay_channels if c not in CHANNEL_CODES]
    if unknown:
        raise ValueError(f"unknown overlay channels {unknown}")

    lo, hi = window if window is not None else volume_window(vol)
    sl = _take_slice(vol.values, axis, index)
    gray = np.clip((sl - lo) / (hi - lo), 0.0, 1.0)
    rgb = np.repeat((gray * 255.0)[:, :, None], 3, axis=2)

    if labels is not None and overlay_channels:
        codes = _take_slice(labels.codes, axis, index)
        for channel in overlay_channels:
            mask = codes == CHANNEL_CODES[channel]
            if not mask.any():
                continue
            color = np.array(OVERLAY_COLORS[channel], dtype=np.float64)
            rgb[mask] = (1.0 - _OVERLAY_ALPHA) * rgb[mask] + _OVERLAY_ALPHA * color

    image = Image.fromarray(np.round(rgb).astype(np.uint8), mode="RGB")
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()
