"""Volumetric similarity metrics and stratified cohort aggregation.

DSC and volume difference are computed per label channel plus the
derived whole-tumour union.  Undefined values (both masks empty under
the exclude policy, or a zero reference volume) are carried as ``None``
and excluded from aggregate statistics, with the exclusion counted.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .volume import (
    REPORT_CHANNELS,
    BinaryMask,
    LabelVolume,
    channel_mask,
    mask_volume_ml,
    require_compatible,
    whole_tumour_mask,
)

# Policy for DSC when both masks are empty: exclude the value from
# statistics, or score the trivially correct prediction as 1.0.
BOTH_EMPTY_EXCLUDE = "exclude"
BOTH_EMPTY_ONE = "one"
BOTH_EMPTY_POLICIES = (BOTH_EMPTY_EXCLUDE, BOTH_EMPTY_ONE)

METRICS_CSV_HEADER = (
    "case_id,channel,dsc,vol_pred_ml,vol_ref_ml,vol_diff_pct,ref_empty,pred_empty"
)


@dataclass(frozen=True)
class MetricRecord:
    case_id: str
    channel: str
    dsc: float | None
    vol_pred_ml: float
    vol_ref_ml: float
    vol_diff_pct: float | None
    ref_empty: bool
    pred_empty: bool


def dice(a: BinaryMask, b: BinaryMask, both_empty: str = BOTH_EMPTY_EXCLUDE) -> float | None:
    """Dice similarity 2|A∩B| / (|A|+|B|).

    Exactly one empty mask scores 0; both empty follows the policy
    (None under "exclude", 1.0 under "one").
    """
    require_compatible(a.geometry, b.geometry)
    if both_empty not in BOTH_EMPTY_POLICIES:
        raise ValueError(f"both_empty must be one of {BOTH_EMPTY_POLICIES}")
    pop_a = a.population
    pop_b = b.population
    if pop_a == 0 and pop_b == 0:
        return None if both_empty == BOTH_EMPTY_EXCLUDE else 1.0
    overlap = int(np.count_nonzero(a.bits & b.bits))
    return 2.0 * overlap / (pop_a + pop_b)


def volume_difference_pct(vol_pred_ml: float, vol_ref_ml: float) -> float | None:
    """Absolute volume discrepancy relative to the reference, in percent.

    Undefined (None) when the reference volume is zero.
    """
    if vol_pred_ml < 0 or vol_ref_ml < 0:
        raise ValueError("volumes must be non-negative")
    if vol_ref_ml == 0:
        return None
    return 100.0 * abs(vol_pred_ml - vol_ref_ml) / vol_ref_ml


def evaluate_case(
    pred: LabelVolume,
    ref: LabelVolume,
    case_id: str = "",
    both_empty: str = BOTH_EMPTY_EXCLUDE,
) -> list[MetricRecord]:
    """One MetricRecord per channel (T2H, ET, CC) plus the WT union."""
    require_compatible(pred.geometry, ref.geometry)
    records = []
    for channel in REPORT_CHANNELS:
        if channel == "WT":
            pred_mask = whole_tumour_mask(pred)
            ref_mask = whole_tumour_mask(ref)
        else:
            pred_mask = channel_mask(pred, channel)
            ref_mask = channel_mask(ref, channel)
        vol_pred = mask_volume_ml(pred_mask)
        vol_ref = mask_volume_ml(ref_mask)
        records.append(
            MetricRecord(
                case_id=case_id,
                channel=channel,
                dsc=dice(pred_mask, ref_mask, both_empty=both_empty),
                vol_pred_ml=vol_pred,
                vol_ref_ml=vol_ref,
                vol_diff_pct=volume_difference_pct(vol_pred, vol_ref),
                ref_empty=ref_mask.population == 0,
                pred_empty=pred_mask.population == 0,
            )
        )
    return records


def pairwise_agreement(
    set_a: dict[str, LabelVolume],
    set_b: dict[str, LabelVolume],
    both_empty: str = BOTH_EMPTY_EXCLUDE,
) -> list[MetricRecord]:
    """Agreement between two annotation sets, with set_a as reference.

    Used identically for intra-rater (same rater, two timepoints) and
    inter-rater (two raters) comparisons.
    """
    if set(set_a) != set(set_b):
        only_a = sorted(set(set_a) - set(set_b))
        only_b = sorted(set(set_b) - set(set_a))
        raise ValueError(f"case sets differ: only in a={only_a}, only in b={only_b}")
    records = []
    for case_id in sorted(set_a):
        records.extend(
            evaluate_case(set_b[case_id], set_a[case_id], case_id=case_id, both_empty=both_empty)
        )
    return records


# ---------------------------------------------------------------------------
# Aggregation

STRATIFY_AXES = ("tumour_type", "location", "none")


@dataclass(frozen=True)
class AggregateRow:
    metric: str
    axis: str
    stratum: str
    channel: str
    n: int
    excluded: int
    median: float | None
    mean: float | None
    sd: float | None


def summarise_values(values: list[float]) -> tuple[float | None, float | None, float | None]:
    """(median, mean, sample SD); SD omitted for n < 2, all None for n = 0.

    Median of an even-length group is the arithmetic mean of the two
    central values; SD uses the n-1 denominator.
    """
    if not values:
        return None, None, None
    arr = np.asarray(values, dtype=np.float64)
    median = float(np.median(arr))
    mean = float(np.mean(arr))
    sd = float(np.std(arr, ddof=1)) if len(values) >= 2 else None
    return median, mean, sd


def aggregate(
    records: list[MetricRecord],
    axis: str = "none",
    manifest=None,
    metrics: tuple[str, ...] = ("dsc", "vol_diff_pct"),
) -> list[AggregateRow]:
    """Group metric values by channel and stratum, reporting n/median/mean/SD.

    ``axis`` is "tumour_type", "location", or "none" (single overall
    stratum).  Stratified axes need a manifest; a record whose case is
    missing from it is an error.  Undefined values never count towards n.
    """
    if axis not in STRATIFY_AXES:
        raise ValueError(f"axis must be one of {STRATIFY_AXES}, got {axis!r}")
    if axis == "none":
        strata = ("all",)
        stratum_of = lambda case_id: "all"
    else:
        if manifest is None:
            raise ValueError(f"stratifying by {axis} requires a manifest")
        strata = manifest.categories(axis)
        stratum_of = lambda case_id: manifest.category_of(case_id, axis)

    grouped: dict[tuple[str, str, str], list[float]] = {}
    excluded: dict[tuple[str, str, str], int] = {}
    for rec in records:
        stratum = stratum_of(rec.case_id)
        for metric in metrics:
            value = getattr(rec, metric)
            key = (metric, stratum, rec.channel)
            if value is None:
                excluded[key] = excluded.get(key, 0) + 1
            else:
                grouped.setdefault(key, []).append(value)

    rows = []
    for metric in metrics:
        for stratum in strata:
            for channel in REPORT_CHANNELS:
                key = (metric, stratum, channel)
                values = grouped.get(key, [])
                median, mean, sd = summarise_values(values)
                rows.append(
                    AggregateRow(
                        metric=metric,
                        axis=axis,
                        stratum=stratum,
                        channel=channel,
                        n=len(values),
                        excluded=excluded.get(key, 0),
                        median=median,
                        mean=mean,
                        sd=sd,
                    )
                )
    return rows


# ---------------------------------------------------------------------------
# CSV serialization.  Provenance (the option set of the producing run) is
# embedded as '# key=value' comment lines so outputs are self-describing.


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _provenance_lines(config: dict | None) -> list[str]:
    if not config:
        return []
    return [f"# {key}={config[key]}" for key in sorted(config)]


def records_to_csv(records: list[MetricRecord], config: dict | None = None) -> str:
    buf = io.StringIO()
    for line in _provenance_lines(config):
        buf.write(line + "\n")
    buf.write(METRICS_CSV_HEADER + "\n")
    for rec in records:
        buf.write(
            ",".join(
                [
                    rec.case_id,
                    rec.channel,
                    _fmt(rec.dsc),
                    _fmt(rec.vol_pred_ml),
                    _fmt(rec.vol_ref_ml),
                    _fmt(rec.vol_diff_pct),
                    _fmt(rec.ref_empty),
                    _fmt(rec.pred_empty),
                ]
            )
            + "\n"
        )
    return buf.getvalue()


def read_metrics_csv(path) -> tuple[list[MetricRecord], dict]:
    """Parse a metrics CSV, returning records and the embedded config."""
    config: dict[str, str] = {}
    rows: list[str] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            body = line.lstrip("# ")
            if "=" in body:
                key, _, value = body.partition("=")
                config[key.strip()] = value.strip()
        elif line.strip():
            rows.append(line)
    if not rows or rows[0] != METRICS_CSV_HEADER:
        raise ValueError(f"bad metrics CSV header in {path}")
    records = []
    for row in csv.reader(rows[1:]):
        case_id, channel, dsc, vp, vr, vd, ref_empty, pred_empty = row
        records.append(
            MetricRecord(
                case_id=case_id,
                channel=channel,
                dsc=float(dsc) if dsc else None,
                vol_pred_ml=float(vp),
                vol_ref_ml=float(vr),
                vol_diff_pct=float(vd) if vd else None,
                ref_empty=ref_empty == "true",
                pred_empty=pred_empty == "true",
            )
        )
    return records, config


AGGREGATES_CSV_HEADER = "metric,axis,stratum,channel,n,excluded,median,mean,sd"


def aggregates_to_csv(rows: list[AggregateRow], config: dict | None = None) -> str:
    buf = io.StringIO()
    for line in _provenance_lines(config):
        buf.write(line + "\n")
    buf.write(AGGREGATES_CSV_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(
            [
                row.metric,
                row.axis,
                row.stratum,
                row.channel,
                row.n,
                row.excluded,
                _fmt(row.median),
                _fmt(row.mean),
                _fmt(row.sd),
            ]
        )
    return buf.getvalue()
