"""Batch orchestration: cohort trees, evaluation runs, reports.

Cohort layout: one directory per case.  Reference trees hold
``seg.nii.gz`` (plus the four sequences when present); prediction trees
mirror the case directories with ``pred.nii.gz``.  All outputs are
UTF-8 with LF line endings and embed the option set that produced them,
so repeat runs with identical inputs are byte-identical.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .combos import ComboStudy, combo_sort_key
from .components import DEFAULT_CONNECTIVITY, DEFAULT_THRESHOLD_VOXELS, filter_small_components
from .manifest import CaseManifest, read_manifest
from .metrics import (
    BOTH_EMPTY_EXCLUDE,
    AggregateRow,
    MetricRecord,
    aggregate,
    aggregates_to_csv,
    evaluate_case,
    records_to_csv,
)
from .nifti import load_label, save_nifti
from .volume import (
    CHANNELS,
    REPORT_CHANNELS,
    GeometryMismatchError,
    LabelCodeError,
    LabelVolume,
)

LABEL_FILE_CANDIDATES = ("pred.nii.gz", "seg.nii.gz", "pred.nii", "seg.nii")


def find_label_file(case_dir: Path) -> Path | None:
    for name in LABEL_FILE_CANDIDATES:
        candidate = case_dir / name
        if candidate.is_file():
            return candidate
    return None


def discover_cases(root) -> dict[str, Path]:
    """Map case_id -> label file for every case directory under root."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"cohort root {root} is not a directory")
    cases = {}
    for case_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        label = find_label_file(case_dir)
        if label is not None:
            cases[case_dir.name] = label
    return cases


def load_label_set(root) -> dict[str, LabelVolume]:
    return {case_id: load_label(path) for case_id, path in discover_cases(root).items()}


@dataclass(frozen=True)
class EvaluationOptions:
    apply_filter: bool = False
    threshold_voxels: int = DEFAULT_THRESHOLD_VOXELS
    connectivity: int = DEFAULT_CONNECTIVITY
    both_empty: str = BOTH_EMPTY_EXCLUDE
    stratify: str = "none"
    workers: int = 4

    def provenance(self) -> dict:
        return {
            "filter": "on" if self.apply_filter else "off",
            "threshold_voxels": self.threshold_voxels,
            "connectivity": self.connectivity,
            "both_empty_policy": self.both_empty,
            "stratify": self.stratify,
        }


@dataclass
class RunResult:
    records: list[MetricRecord] = field(default_factory=list)
    aggregates: list[AggregateRow] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def run_evaluation(
    pred_root,
    ref_root,
    manifest: CaseManifest | None = None,
    options: EvaluationOptions = EvaluationOptions(),
    out_dir=None,
) -> RunResult:
    """Evaluate a prediction tree against a reference tree.

    Per-case failures (missing counterpart, bad labels, geometry
    mismatch) are collected and the run continues; callers decide the
    exit status from ``result.errors``.
    """
    preds = discover_cases(pred_root)
    refs = discover_cases(ref_root)
    result = RunResult()

    for case_id in sorted(set(preds) - set(refs)):
        result.errors.append((case_id, "prediction present but reference missing"))
    for case_id in sorted(set(refs) - set(preds)):
        result.errors.append((case_id, "reference present but prediction missing"))

    def evaluate_one(case_id: str):
        try:
            pred = load_label(preds[case_id])
            ref = load_label(refs[case_id])
            if options.apply_filter:
                pred = filter_small_components(
                    pred,
                    threshold_voxels=options.threshold_voxels,
                    connectivity=options.connectivity,
                )
            return evaluate_case(pred, ref, case_id=case_id, both_empty=options.both_empty), None
        except (GeometryMismatchError, LabelCodeError, ValueError, OSError) as exc:
            return None, str(exc)

    # Case-level parallelism; determinism comes from reducing in sorted
    # case order, not from execution order.
    shared = sorted(set(preds) & set(refs))
    with ThreadPoolExecutor(max_workers=max(1, options.workers)) as pool:
        outcomes = list(pool.map(evaluate_one, shared))
    for case_id, (records, error) in zip(shared, outcomes):
        if error is not None:
            result.errors.append((case_id, error))
        else:
            result.records.extend(records)

    axes = []
    if options.stratify in ("tumour_type", "location"):
        axes.append(options.stratify)
    result.aggregates = aggregate(result.records, axis="none")
    for axis in axes:
        result.aggregates += aggregate(result.records, axis=axis, manifest=manifest)

    if out_dir is not None:
        write_run_outputs(result, options, out_dir)
    return result


def write_run_outputs(result: RunResult, options: EvaluationOptions, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance = options.provenance()
    (out_dir / "metrics.csv").write_text(
        records_to_csv(result.records, config=provenance), encoding="utf-8"
    )
    (out_dir / "aggregates.csv").write_text(
        aggregates_to_csv(result.aggregates, config=provenance), encoding="utf-8"
    )
    if result.errors:
        lines = ["case_id,error"]
        lines += [f"{case_id},{message}" for case_id, message in result.errors]
        (out_dir / "errors.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def postprocess_tree(
    in_root,
    out_root,
    threshold_voxels: int = DEFAULT_THRESHOLD_VOXELS,
    connectivity: int = DEFAULT_CONNECTIVITY,
    channels=None,
) -> list[str]:
    """Filter every case label volume under in_root into out_root."""
    channels = tuple(channels) if channels else CHANNELS
    cases = discover_cases(in_root)
    out_root = Path(out_root)
    for case_id, label_path in sorted(cases.items()):
        vol = load_label(label_path)
        filtered = filter_small_components(
            vol, threshold_voxels=threshold_voxels, connectivity=connectivity, channels=channels
        )
        save_nifti(filtered, out_root / case_id / label_path.name)
    return sorted(cases)


# ---------------------------------------------------------------------------
# Sequence-combination study

COMBO_CSV_HEADER = "combo,channel,n,median,sd"


def run_combo_study(
    study: ComboStudy,
    options: EvaluationOptions = EvaluationOptions(),
) -> tuple[list[tuple[str, str, int, float | None, float | None]], list[tuple[str, str]]]:
    """Evaluate each combo's prediction tree against the shared reference.

    Returns (rows, errors); one row per combo and channel with the DSC
    median and SD over the combo's cases.
    """
    manifest = read_manifest(study.manifest_path) if study.manifest_path else None
    rows = []
    errors: list[tuple[str, str]] = []
    case_sets = {}
    for name in sorted(study.combo_dirs, key=combo_sort_key):
        result = run_evaluation(study.combo_dirs[name], study.ref_dir, manifest, options)
        errors.extend((f"{name}:{case_id}", message) for case_id, message in result.errors)
        case_sets[name] = {rec.case_id for rec in result.records}
        combo_aggregates = [
            row for row in result.aggregates if row.metric == "dsc" and row.axis == "none"
        ]
        for agg in combo_aggregates:
            rows.append((name, agg.channel, agg.n, agg.median, agg.sd))

    covered = set.union(*case_sets.values()) if case_sets else set()
    for name, cases in case_sets.items():
        missing = covered - cases
        if missing:
            errors.append((name, f"combo does not cover cases: {sorted(missing)}"))
    return rows, errors


def combo_rows_to_csv(rows, config: dict | None = None) -> str:
    buf = io.StringIO()
    if config:
        for key in sorted(config):
            buf.write(f"# {key}={config[key]}\n")
    buf.write(COMBO_CSV_HEADER + "\n")
    for name, channel, n, median, sd in rows:
        median_s = "" if median is None else str(median)
        sd_s = "" if sd is None else str(sd)
        buf.write(f"{name},{channel},{n},{median_s},{sd_s}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Human-readable report rendering

def _fmt_cell(metric: str, median, sd) -> str:
    if median is None:
        return "-"
    if metric == "dsc":
        return f"{median:.2f} ({sd:.2f})" if sd is not None else f"{median:.2f}"
    return f"{median:.1f} ({sd:.1f})" if sd is not None else f"{median:.1f}"


def render_report_md(aggregates: list[AggregateRow], config: dict | None = None) -> str:
    """Markdown tables, one per metric and axis: strata rows, channel columns."""
    lines = []
    if config:
        lines.append("Run configuration: " + ", ".join(f"{k}={config[k]}" for k in sorted(config)))
        lines.append("")
    seen = []
    for row in aggregates:
        key = (row.metric, row.axis)
        if key not in seen:
            seen.append(key)
    titles = {"dsc": "DSC", "vol_diff_pct": "Volume difference (%)"}
    for metric, axis in seen:
        subset = [r for r in aggregates if r.metric == metric and r.axis == axis]
        strata = []
        for r in subset:
            if r.stratum not in strata:
                strata.append(r.stratum)
        axis_title = {"none": "overall", "tumour_type": "by tumour type", "location": "by location"}[axis]
        lines.append(f"## {titles.get(metric, metric)}, {axis_title} (median (SD))")
        lines.append("")
        lines.append("| Stratum | " + " | ".join(REPORT_CHANNELS) + " |")
        lines.append("|---" * (len(REPORT_CHANNELS) + 1) + "|")
        by_key = {(r.stratum, r.channel): r for r in subset}
        for stratum in strata:
            cells = [
                _fmt_cell(metric, by_key[(stratum, ch)].median, by_key[(stratum, ch)].sd)
                for ch in REPORT_CHANNELS
            ]
            lines.append(f"| {stratum} | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)
