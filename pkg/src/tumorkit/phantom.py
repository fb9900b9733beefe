"""Synthetic cohort generator: ground-truth phantoms and degraded copies.

Phantoms are nested digital ellipsoids: an outer bright-on-T2 region,
an optional enhancing shell, and an optional cystic core.  A voxel
belongs to a region when its centre lies inside the analytic surface
(distance measured in mm, boundary included).  All randomness comes
from the documented splitmix64 stream, so a seed pins every byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .manifest import LOCATIONS, SEXES, SPLITS, TUMOUR_TYPES, CaseInfo, CaseManifest, write_manifest
from .nifti import save_nifti
from .rng import SplitMix64, derive_seed
from .volume import (
    BACKGROUND,
    CHANNEL_CODES,
    CHANNELS,
    SEQUENCES,
    IntensityVolume,
    LabelVolume,
    VolumeGeometry,
)

CYST_STYLES = ("ring-enhancing", "non-enhancing")

# Base display intensities per (sequence, region).  The cystic core is
# dark on T1 and bright on T2; the enhancing shell is bright on T1-C.
_REGION_LEVELS = {
    "T1": {"bg": 90.0, "T2H": 70.0, "ET": 80.0, "CC": 25.0},
    "T1-C": {"bg": 90.0, "T2H": 75.0, "ET": 200.0, "CC": 30.0},
    "T2": {"bg": 80.0, "T2H": 170.0, "ET": 120.0, "CC": 220.0},
    "FLAIR": {"bg": 70.0, "T2H": 180.0, "ET": 130.0, "CC": 60.0},
}
_NOISE_AMPLITUDE = 4.0
# Non-enhancing cysts show no bright rim on T1-C.
_NON_ENHANCING_SHELL_T1C = 95.0


@dataclass(frozen=True)
class PhantomSpec:
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    centre: tuple[float, float, float]
    t2h_radius_mm: float
    et_shell_mm: float | None = None
    cc_core_radius_mm: float | None = None
    cyst_style: str = "ring-enhancing"
    seed: int = 0

    def __post_init__(self):
        if self.cyst_style not in CYST_STYLES:
            raise ValueError(f"cyst_style must be one of {CYST_STYLES}, got {self.cyst_style!r}")
        if self.t2h_radius_mm <= 0:
            raise ValueError("t2h_radius_mm must be positive")
        cc = self.cc_core_radius_mm or 0.0
        et = self.et_shell_mm or 0.0
        if cc < 0 or et < 0:
            raise ValueError("radii must be non-negative")
        if (cc or et) and not cc + et < self.t2h_radius_mm:
            raise ValueError(
                f"regions must nest strictly: cc {cc} + et shell {et} must be < t2h {self.t2h_radius_mm}"
            )
        for axis in range(3):
            half_extent = self.t2h_radius_mm / self.spacing[axis]
            if self.centre[axis] - half_extent < 0 or self.centre[axis] + half_extent > self.shape[axis] - 1:
                raise ValueError(
                    f"radius {self.t2h_radius_mm} mm exceeds the grid along axis {axis}"
                )


def _distance_sq_mm(shape, spacing, centre) -> np.ndarray:
    grids = np.ogrid[: shape[0], : shape[1], : shape[2]]
    d_sq = np.zeros(shape, dtype=np.float64)
    for axis in range(3):
        d_sq = d_sq + ((grids[axis] - centre[axis]) * spacing[axis]) ** 2
    return d_sq


def generate_phantom(spec: PhantomSpec) -> tuple[LabelVolume, dict[str, IntensityVolume]]:
    """Build the label volume and the four per-sequence intensity volumes."""
    geometry = VolumeGeometry(spec.shape, spec.spacing, np.diag([*spec.spacing, 1.0]))

    d_sq = _distance_sq_mm(spec.shape, spec.spacing, spec.centre)
    cc_r = spec.cc_core_radius_mm or 0.0
    et_outer = cc_r + (spec.et_shell_mm or 0.0)

    codes = np.zeros(spec.shape, dtype=np.uint8)
    codes[d_sq <= spec.t2h_radius_mm**2] = CHANNEL_CODES["T2H"]
    if spec.et_shell_mm:
        codes[(d_sq <= et_outer**2) & (d_sq > cc_r**2)] = CHANNEL_CODES["ET"]
    if spec.cc_core_radius_mm:
        codes[d_sq <= cc_r**2] = CHANNEL_CODES["CC"]
    labels = LabelVolume(geometry, codes)

    rng = SplitMix64(spec.seed)
    intensities = {}
    for seq in SEQUENCES:
        levels = _REGION_LEVELS[seq]
        values = np.full(spec.shape, levels["bg"], dtype=np.float64)
        for name in CHANNELS:
            level = levels[name]
            if seq == "T1-C" and name == "ET" and spec.cyst_style == "non-enhancing":
                level = _NON_ENHANCING_SHELL_T1C
            values[codes == CHANNEL_CODES[name]] = level
        noise = _NOISE_AMPLITUDE * (2.0 * rng.uniform_array(values.size) - 1.0)
        values = values + noise.reshape(spec.shape)
        intensities[seq] = IntensityVolume(geometry, values, seq)
    return labels, intensities


# ---------------------------------------------------------------------------
# Perturbations: deterministic degradations modelling prediction failure
# modes (misplaced boundaries, spurious small blobs, missed regions).

_PERTURBATION_KINDS = ("translate", "dilate", "erode", "speckle", "drop_channel")
# Apply outer regions first so a grown outer boundary never erases an
# inner region; inner regions may grow into outer ones.
_MORPH_ORDER = ("T2H", "ET", "CC")
_SPECKLE_CLEARANCE = 2


@dataclass(frozen=True)
class Perturbation:
    kind: str
    offset: tuple[int, int, int] = (0, 0, 0)
    iterations: int = 1
    count: int = 0
    size: int = 0
    channel: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _PERTURBATION_KINDS:
            raise ValueError(f"kind must be one of {_PERTURBATION_KINDS}, got {self.kind!r}")
        if self.kind in ("dilate", "erode") and self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.kind == "speckle":
            if self.count < 0 or self.size < 1:
                raise ValueError("speckle needs count >= 0 and size >= 1")
            if self.channel not in CHANNEL_CODES:
                raise ValueError(f"speckle channel must be one of {CHANNELS}")
        if self.kind == "drop_channel" and self.channel not in CHANNEL_CODES:
            raise ValueError(f"drop_channel channel must be one of {CHANNELS}")

    @classmethod
    def from_dict(cls, data: dict) -> "Perturbation":
        known = {"kind", "offset", "iterations", "count", "size", "channel", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown perturbation fields: {sorted(unknown)}")
        data = dict(data)
        if "offset" in data:
            data["offset"] = tuple(int(v) for v in data["offset"])
        return cls(**data)


def _translate(codes: np.ndarray, offset) -> np.ndarray:
    out = np.zeros_like(codes)
    src = []
    dst = []
    for axis, d in enumerate(offset):
        n = codes.shape[axis]
        if abs(d) >= n:
            return out
        if d >= 0:
            src.append(slice(0, n - d))
            dst.append(slice(d, n))
        else:
            src.append(slice(-d, n))
            dst.append(slice(0, n + d))
    out[tuple(dst)] = codes[tuple(src)]
    return out


def _morph(codes: np.ndarray, iterations: int, grow: bool) -> np.ndarray:
    structure = ndimage.generate_binary_structure(3, 1)
    out = np.zeros_like(codes)
    for name in _MORPH_ORDER:
        code = CHANNEL_CODES[name]
        mask = codes == code
        if not mask.any():
            continue
        if iterations > 0:
            op = ndimage.binary_dilation if grow else ndimage.binary_erosion
            mask = op(mask, structure=structure, iterations=iterations)
        out[mask] = code
    return out


def _speckle(codes: np.ndarray, p: Perturbation) -> np.ndarray:
    out = np.array(codes)
    rng = SplitMix64(p.seed)
    side = int(np.ceil(p.size ** (1.0 / 3.0)))
    shape = codes.shape
    if any(side > n for n in shape):
        raise ValueError(f"speckle size {p.size} does not fit the grid {shape}")

    # Keep speckles >= 2 voxels clear of existing labels and each other so
    # each one is its own component even under corner adjacency.
    structure = ndimage.generate_binary_structure(3, 3)
    forbidden = ndimage.binary_dilation(out != 0, structure=structure, iterations=_SPECKLE_CLEARANCE)

    cube_template = np.zeros((side, side, side), dtype=bool)
    cube_template.ravel()[: p.size] = True

    placed = 0
    attempts = 0
    max_attempts = max(1000, 200 * p.count)
    while placed < p.count:
        attempts += 1
        if attempts > max_attempts:
            raise ValueError(
                f"could not place {p.count} speckles of size {p.size} after {max_attempts} attempts"
            )
        corner = tuple(rng.randint(0, shape[a] - side) for a in range(3))
        region = tuple(slice(corner[a], corner[a] + side) for a in range(3))
        if forbidden[region].any():
            continue
        blob = cube_template
        out[region][blob] = CHANNEL_CODES[p.channel]
        blob_full = np.zeros(shape, dtype=bool)
        blob_full[region] = blob
        forbidden |= ndimage.binary_dilation(blob_full, structure=structure, iterations=_SPECKLE_CLEARANCE)
        placed += 1
    return out


def perturb(gt: LabelVolume, p: Perturbation) -> LabelVolume:
    """Deterministically degraded copy of a ground-truth volume."""
    if p.kind == "translate":
        out = _translate(gt.codes, p.offset)
    elif p.kind == "dilate":
        out = _morph(gt.codes, p.iterations, grow=True)
    elif p.kind == "erode":
        out = _morph(gt.codes, p.iterations, grow=False)
    elif p.kind == "speckle":
        out = _speckle(gt.codes, p)
    elif p.kind == "drop_channel":
        out = np.array(gt.codes)
        out[out == CHANNEL_CODES[p.channel]] = BACKGROUND
    else:  # pragma: no cover - guarded by Perturbation validation
        raise ValueError(p.kind)
    return LabelVolume(gt.geometry, out)


def perturb_all(gt: LabelVolume, perturbations: list[Perturbation]) -> LabelVolume:
    vol = gt
    for p in perturbations:
        vol = perturb(vol, p)
    return vol


# ---------------------------------------------------------------------------
# Cohort emission: one directory per case with the four sequences and the
# ground-truth labels, a mirrored prediction tree, and a manifest that
# cycles through the stratification vocabularies.

SEQUENCE_FILES = {"T1": "t1.nii.gz", "T1-C": "t1c.nii.gz", "T2": "t2.nii.gz", "FLAIR": "flair.nii.gz"}
REF_LABEL_FILE = "seg.nii.gz"
PRED_LABEL_FILE = "pred.nii.gz"


@dataclass(frozen=True)
class CohortSpec:
    seed: int
    cases: int
    shape: tuple[int, int, int] = (40, 40, 40)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    t2h_radius_mm: tuple[float, float] = (8.0, 13.0)
    et_shell_mm: tuple[float, float] = (2.0, 3.5)
    cc_core_radius_mm: tuple[float, float] = (2.0, 4.0)
    et_fraction: float = 0.7
    cc_fraction: float = 0.3
    perturbations: tuple[Perturbation, ...] = field(default_factory=tuple)
    case_prefix: str = "case"

    @classmethod
    def from_json(cls, path) -> "CohortSpec":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        perturbations = tuple(
            Perturbation.from_dict(p) for p in data.pop("perturbations", [])
        )
        known = {
            "seed", "cases", "shape", "spacing", "t2h_radius_mm",
            "et_shell_mm", "cc_core_radius_mm", "et_fraction", "cc_fraction",
            "case_prefix",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown cohort spec fields: {sorted(unknown)}")
        for key in ("shape", "spacing", "t2h_radius_mm", "et_shell_mm", "cc_core_radius_mm"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(perturbations=perturbations, **data)


def _case_phantom_spec(cohort: CohortSpec, index: int) -> PhantomSpec:
    rng = SplitMix64(derive_seed(cohort.seed, index))
    shape = cohort.shape
    spacing = cohort.spacing

    t2h = rng.uniform_in(*cohort.t2h_radius_mm)
    has_et = rng.uniform() < cohort.et_fraction
    has_cc = rng.uniform() < cohort.cc_fraction
    cc = rng.uniform_in(*cohort.cc_core_radius_mm) if has_cc else None
    et = rng.uniform_in(*cohort.et_shell_mm) if has_et else None
    # Shrink inner regions if the draw would break strict nesting.
    inner = (cc or 0.0) + (et or 0.0)
    if inner >= t2h:
        scale = (t2h - 0.5) / inner
        cc = cc * scale if cc else None
        et = et * scale if et else None

    # Jitter the centre while keeping the sphere inside the grid.
    centre = []
    for axis in range(3):
        margin = t2h / spacing[axis] + 1.0
        lo, hi = margin, shape[axis] - 1 - margin
        mid = (shape[axis] - 1) / 2.0
        if lo >= hi:
            centre.append(mid)
        else:
            jitter = min(2.0, (hi - lo) / 2.0)
            centre.append(mid + rng.uniform_in(-jitter, jitter))

    style = "ring-enhancing" if has_et else "non-enhancing"
    return PhantomSpec(
        shape=shape,
        spacing=spacing,
        centre=tuple(centre),
        t2h_radius_mm=t2h,
        et_shell_mm=et,
        cc_core_radius_mm=cc,
        cyst_style=style,
        seed=derive_seed(cohort.seed, index, 1),
    )


def _case_perturbations(cohort: CohortSpec, index: int) -> list[Perturbation]:
    out = []
    for k, p in enumerate(cohort.perturbations):
        if p.kind == "speckle":
            p = Perturbation(
                kind=p.kind, count=p.count, size=p.size, channel=p.channel,
                seed=derive_seed(cohort.seed, index, 2 + k),
            )
        out.append(p)
    return out


def generate_cohort(cohort: CohortSpec, out_dir) -> CaseManifest:
    """Write ref/ and pred/ trees plus manifest.csv; returns the manifest."""
    out_dir = Path(out_dir)
    cases = []
    for index in range(cohort.cases):
        case_id = f"{cohort.case_prefix}-{index:04d}"
        spec = _case_phantom_spec(cohort, index)
        labels, intensities = generate_phantom(spec)

        case_dir = out_dir / "ref" / case_id
        for seq, filename in SEQUENCE_FILES.items():
            save_nifti(intensities[seq], case_dir / filename)
        save_nifti(labels, case_dir / REF_LABEL_FILE)

        pred = perturb_all(labels, _case_perturbations(cohort, index))
        save_nifti(pred, out_dir / "pred" / case_id / PRED_LABEL_FILE)

        rng = SplitMix64(derive_seed(cohort.seed, index, 99))
        cases.append(
            CaseInfo(
                case_id=case_id,
                age_years=round(rng.uniform_in(0.5, 18.0), 1),
                sex=SEXES[index % len(SEXES)],
                tumour_type=TUMOUR_TYPES[index % len(TUMOUR_TYPES)],
                location=LOCATIONS[index % len(LOCATIONS)],
                split=SPLITS[1],
            )
        )
    manifest = CaseManifest(cases)
    write_manifest(manifest, out_dir / "manifest.csv")
    return manifest
