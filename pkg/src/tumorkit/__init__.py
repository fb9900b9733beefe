"""Toolkit for evaluating paediatric brain tumour segmentations.

Covers label postprocessing (small-component removal), volumetric
metrics with stratified aggregation, rater agreement, contouring
time-saving analysis, a sequence-combination study harness, synthetic
phantom cohorts for testing, and a blinded star-rating service.
"""

from .components import (
    ComponentSet,
    component_stats,
    connected_components,
    filter_small_components,
)
from .metrics import (
    MetricRecord,
    aggregate,
    dice,
    evaluate_case,
    pairwise_agreement,
    volume_difference_pct,
)
from .nifti import NiftiError, load_intensity, load_label, load_nifti, save_nifti
from .phantom import CohortSpec, Perturbation, PhantomSpec, generate_cohort, generate_phantom, perturb
from .timing import compute_time_saving, ingest_timing_csv
from .volume import (
    BinaryMask,
    GeometryMismatchError,
    IntensityVolume,
    LabelCodeError,
    LabelVolume,
    VolumeGeometry,
    channel_mask,
    mask_volume_ml,
    whole_tumour_mask,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "CohortSpec",
    "ComponentSet",
    "GeometryMismatchError",
    "IntensityVolume",
    "LabelCodeError",
    "LabelVolume",
    "MetricRecord",
    "NiftiError",
    "Perturbation",
    "PhantomSpec",
    "VolumeGeometry",
    "aggregate",
    "channel_mask",
    "component_stats",
    "compute_time_saving",
    "connected_components",
    "dice",
    "evaluate_case",
    "filter_small_components",
    "generate_cohort",
    "generate_phantom",
    "ingest_timing_csv",
    "load_intensity",
    "load_label",
    "load_nifti",
    "mask_volume_ml",
    "pairwise_agreement",
    "perturb",
    "save_nifti",
    "volume_difference_pct",
    "whole_tumour_mask",
]
