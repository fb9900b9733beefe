"""Cohort manifest: per-case demographics and stratification categories."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

TUMOUR_TYPES = (
    "Medulloblastoma",
    "Ependymoma",
    "High Grade/Diffuse Midline Glioma",
    "Low Grade Glioma",
    "Other",
)
LOCATIONS = (
    "Brain Hemispheres",
    "Posterior Fossa",
    "Brainstem",
    "Pinealis",
    "Other",
)
SEXES = ("F", "M")
SPLITS = ("train", "test")

MANIFEST_CSV_HEADER = "case_id,age_years,sex,tumour_type,location,split"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class CaseInfo:
    case_id: str
    age_years: float
    sex: str
    tumour_type: str
    location: str
    split: str

    def __post_init__(self):
        if not self.case_id:
            raise ManifestError("empty case_id")
        if self.age_years < 0:
            raise ManifestError(f"{self.case_id}: negative age {self.age_years}")
        if self.sex not in SEXES:
            raise ManifestError(f"{self.case_id}: sex must be one of {SEXES}, got {self.sex!r}")
        if self.tumour_type not in TUMOUR_TYPES:
            raise ManifestError(f"{self.case_id}: unknown tumour_type {self.tumour_type!r}")
        if self.location not in LOCATIONS:
            raise ManifestError(f"{self.case_id}: unknown location {self.location!r}")
        if self.split not in SPLITS:
            raise ManifestError(f"{self.case_id}: split must be one of {SPLITS}, got {self.split!r}")


class CaseManifest:
    """Immutable collection of CaseInfo rows keyed by unique case_id."""

    def __init__(self, cases: list[CaseInfo]):
        self._by_id: dict[str, CaseInfo] = {}
        for case in cases:
            if case.case_id in self._by_id:
                raise ManifestError(f"duplicate case_id {case.case_id!r}")
            self._by_id[case.case_id] = case
        self.cases = tuple(self._by_id[cid] for cid in sorted(self._by_id))

    def __len__(self) -> int:
        return len(self.cases)

    def __contains__(self, case_id: str) -> bool:
        return case_id in self._by_id

    def get(self, case_id: str) -> CaseInfo:
        if case_id not in self._by_id:
            raise ManifestError(f"case_id {case_id!r} not in manifest")
        return self._by_id[case_id]

    def categories(self, axis: str) -> tuple[str, ...]:
        if axis == "tumour_type":
            return TUMOUR_TYPES
        if axis == "location":
            return LOCATIONS
        raise ValueError(f"axis must be 'tumour_type' or 'location', got {axis!r}")

    def category_of(self, case_id: str, axis: str) -> str:
        case = self.get(case_id)
        return case.tumour_type if axis == "tumour_type" else case.location


def read_manifest(path) -> CaseManifest:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != MANIFEST_CSV_HEADER:
        raise ManifestError(f"bad manifest header in {path}; expected {MANIFEST_CSV_HEADER!r}")
    cases = []
    for row in csv.reader(lines[1:]):
        if len(row) != 6:
            raise ManifestError(f"manifest row has {len(row)} fields, expected 6: {row}")
        case_id, age, sex, tumour_type, location, split = row
        try:
            age_years = float(age)
        except ValueError:
            raise ManifestError(f"{case_id}: non-numeric age {age!r}") from None
        cases.append(CaseInfo(case_id, age_years, sex, tumour_type, location, split))
    return CaseManifest(cases)


def write_manifest(manifest: CaseManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(MANIFEST_CSV_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for case in manifest.cases:
        writer.writerow(
            [case.case_id, case.age_years, case.sex, case.tumour_type, case.location, case.split]
        )
    path.write_text(buf.getvalue(), encoding="utf-8")
