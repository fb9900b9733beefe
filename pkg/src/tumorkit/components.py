"""3D connected-component labeling and the small-component filter.

Labeling runs per channel on the binary channel mask.  Component ids are
always assigned in C-order scan order of the grid (first foreground voxel
of a component encountered during the scan gets the lowest id), so two
runs over the same mask produce identical label arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import BACKGROUND, CHANNEL_CODES, CHANNELS, BinaryMask, LabelVolume, VolumeGeometry

VALID_CONNECTIVITIES = (6, 18, 26)
DEFAULT_THRESHOLD_VOXELS = 125
DEFAULT_CONNECTIVITY = 26

# scipy encodes adjacency as the structuring-element rank:
# 1 = shared face, 2 = face or edge, 3 = face, edge or corner.
_STRUCTURE_RANK = {6: 1, 18: 2, 26: 3}


def adjacency_structure(connectivity: int) -> np.ndarray:
    if connectivity not in VALID_CONNECTIVITIES:
        raise ValueError(f"connectivity must be one of {VALID_CONNECTIVITIES}, got {connectivity}")
    return ndimage.generate_binary_structure(3, _STRUCTURE_RANK[connectivity])


@dataclass(frozen=True)
class ComponentSet:
    """Partition of a mask into maximal connected components.

    ``labels`` holds component ids (0 = background); ``sizes[i]`` is the
    voxel count of component ``i + 1``; ``bounding_boxes[i]`` is the
    half-open per-axis index range of component ``i + 1``.
    """

    labels: np.ndarray
    sizes: np.ndarray
    bounding_boxes: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def component_count(self) -> int:
        return len(self.sizes)


def _relabel_scan_order(raw: np.ndarray, count: int) -> np.ndarray:
    """Remap component ids so they follow first appearance in C-order scan."""
    if count == 0:
        return raw.astype(np.int32)
    flat = raw.ravel(order="C")
    foreground = np.flatnonzero(flat)
    ids, first_index = np.unique(flat[foreground], return_index=True)
    appearance = np.argsort(first_index, kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[ids[appearance]] = np.arange(1, count + 1, dtype=np.int32)
    return remap[raw]


def connected_components(mask: BinaryMask, connectivity: int = DEFAULT_CONNECTIVITY) -> ComponentSet:
    """Label maximal connected components under the given adjacency."""
    structure = adjacency_structure(connectivity)
    raw, count = ndimage.label(mask.bits, structure=structure)
    labels = _relabel_scan_order(raw, count)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    slices = ndimage.find_objects(labels, max_label=count)
    boxes = tuple(
        tuple((s.start, s.stop) for s in slc) for slc in slices if slc is not None
    )
    return ComponentSet(labels=labels, sizes=sizes, bounding_boxes=boxes)


@dataclass(frozen=True)
class ComponentStat:
    component_id: int
    size_voxels: int
    volume_ml: float
    bounding_box: tuple[tuple[int, int], ...]


def component_stats(cs: ComponentSet, geometry: VolumeGeometry) -> list[ComponentStat]:
    """Per-component size, volume, and bounding box, largest first."""
    sx, sy, sz = geometry.spacing
    stats = [
        ComponentStat(
            component_id=i + 1,
            size_voxels=int(cs.sizes[i]),
            volume_ml=int(cs.sizes[i]) * sx * sy * sz / 1000.0,
            bounding_box=cs.bounding_boxes[i],
        )
        for i in range(cs.component_count)
    ]
    stats.sort(key=lambda s: (-s.size_voxels, s.component_id))
    return stats


def filter_small_components(
    vol: LabelVolume,
    threshold_voxels: int = DEFAULT_THRESHOLD_VOXELS,
    connectivity: int = DEFAULT_CONNECTIVITY,
    channels=CHANNELS,
) -> LabelVolume:
    """Remove per-channel components smaller than the threshold.

    Components with size strictly below ``threshold_voxels`` are set to
    background; a component of exactly the threshold size survives.
    Channels are filtered independently, so removing a blob in one
    channel never touches voxels of another.
    """
    if threshold_voxels < 1:
        raise ValueError(f"threshold_voxels must be positive, got {threshold_voxels}")
    structure = adjacency_structure(connectivity)
    unknown = [c for c in channels if c not in CHANNEL_CODES]
    if unknown:
        raise ValueError(f"unknown channels {unknown}; valid: {CHANNELS}")

    out = np.array(vol.codes)
    for name in channels:
        code = CHANNEL_CODES[name]
        mask = vol.codes == code
        if not mask.any():
            continue
        labels, count = ndimage.label(mask, structure=structure)
        sizes = np.bincount(labels.ravel(), minlength=count + 1)
        small = sizes < threshold_voxels
        small[0] = False
        if small.any():
            out[small[labels]] = BACKGROUND
    return LabelVolume(vol.geometry, out)
