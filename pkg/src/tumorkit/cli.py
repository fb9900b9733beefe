"""Command-line interface for the segmentation evaluation toolkit."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .combos import ComboStudy
from .components import DEFAULT_CONNECTIVITY, DEFAULT_THRESHOLD_VOXELS, VALID_CONNECTIVITIES
from .manifest import read_manifest
from .metrics import BOTH_EMPTY_EXCLUDE, BOTH_EMPTY_ONE, aggregate, aggregates_to_csv, read_metrics_csv
from .phantom import CohortSpec, generate_cohort
from .timing import ingest_timing_csv
from .volume import CHANNELS
from .workflow import (
    EvaluationOptions,
    combo_rows_to_csv,
    load_label_set,
    postprocess_tree,
    render_report_md,
    run_combo_study,
    run_evaluation,
)

_STRATIFY_CHOICES = {"type": "tumour_type", "location": "location", "none": "none"}


def _parse_channels(text: str) -> tuple[str, ...]:
    channels = tuple(tok.strip() for tok in text.split(",") if tok.strip())
    unknown = [c for c in channels if c not in CHANNELS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown channels {unknown}; valid: {CHANNELS}")
    return channels


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tumorkit",
        description="Postprocess, evaluate, and report on brain tumour segmentations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("postprocess", help="remove small connected components per channel")
    p.add_argument("--in", dest="in_root", required=True, help="cohort root with label volumes")
    p.add_argument("--out", dest="out_root", required=True)
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD_VOXELS)
    p.add_argument("--connectivity", type=int, choices=VALID_CONNECTIVITIES, default=DEFAULT_CONNECTIVITY)
    p.add_argument("--channels", type=_parse_channels, default=CHANNELS, help="e.g. ET,CC")

    p = sub.add_parser("evaluate", help="DSC / volume-difference evaluation of a prediction tree")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--manifest")
    p.add_argument("--stratify", choices=sorted(_STRATIFY_CHOICES), default="none")
    p.add_argument("--filter", action="store_true", help="apply the component size filter first")
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD_VOXELS)
    p.add_argument("--connectivity", type=int, choices=VALID_CONNECTIVITIES, default=DEFAULT_CONNECTIVITY)
    p.add_argument("--empty-policy", choices=(BOTH_EMPTY_EXCLUDE, BOTH_EMPTY_ONE), default=BOTH_EMPTY_EXCLUDE)
    p.add_argument("--out", required=True, help="output directory for metrics/aggregates CSVs")

    p = sub.add_parser("agree", help="rater agreement between two annotation trees")
    p.add_argument("--a", dest="set_a", required=True, help="reference annotation tree")
    p.add_argument("--b", dest="set_b", required=True)
    p.add_argument("--empty-policy", choices=(BOTH_EMPTY_EXCLUDE, BOTH_EMPTY_ONE), default=BOTH_EMPTY_EXCLUDE)
    p.add_argument("--out", help="output directory (default: print summary only)")

    p = sub.add_parser("combos", help="sequence-combination study over prediction trees")
    p.add_argument("--study", required=True, help="JSON study manifest")
    p.add_argument("--out", help="output CSV path (default stdout)")

    p = sub.add_parser("time", help="contouring time-saving summary from a timing CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", help="write full-precision summary CSV here")

    p = sub.add_parser("phantom", help="generate a synthetic cohort")
    p.add_argument("--spec", required=True, help="JSON cohort spec")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="render aggregate tables from a metrics CSV")
    p.add_argument("--metrics", required=True)
    p.add_argument("--manifest", help="enables tumour-type and location stratification")
    p.add_argument("--format", choices=("csv", "md"), default="md")
    p.add_argument("--out", help="output path (default stdout)")

    return parser


def _cmd_postprocess(args) -> int:
    cases = postprocess_tree(
        args.in_root, args.out_root,
        threshold_voxels=args.threshold, connectivity=args.connectivity, channels=args.channels,
    )
    print(f"postprocessed {len(cases)} cases -> {args.out_root}")
    return 0


def _cmd_evaluate(args) -> int:
    manifest = read_manifest(args.manifest) if args.manifest else None
    stratify = _STRATIFY_CHOICES[args.stratify]
    if stratify != "none" and manifest is None:
        print("error: --stratify requires --manifest", file=sys.stderr)
        return 2
    options = EvaluationOptions(
        apply_filter=args.filter,
        threshold_voxels=args.threshold,
        connectivity=args.connectivity,
        both_empty=args.empty_policy,
        stratify=stratify,
    )
    result = run_evaluation(args.pred, args.ref, manifest, options, out_dir=args.out)
    print(f"evaluated {len({r.case_id for r in result.records})} cases -> {args.out}")
    for case_id, message in result.errors:
        print(f"error: {case_id}: {message}", file=sys.stderr)
    return 0 if result.ok else 1


def _cmd_agree(args) -> int:
    from .metrics import pairwise_agreement, records_to_csv

    set_a = load_label_set(args.set_a)
    set_b = load_label_set(args.set_b)
    records = pairwise_agreement(set_a, set_b, both_empty=args.empty_policy)
    rows = aggregate(records, axis="none")
    config = {"mode": "agreement", "reference": "a", "both_empty_policy": args.empty_policy}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(records_to_csv(records, config), encoding="utf-8")
        (out / "aggregates.csv").write_text(aggregates_to_csv(rows, config), encoding="utf-8")
    for row in rows:
        if row.metric == "dsc":
            median = "-" if row.median is None else f"{row.median:.3f}"
            print(f"{row.channel}: DSC median {median} (n={row.n})")
    return 0


def _cmd_combos(args) -> int:
    study = ComboStudy.from_json(args.study)
    rows, errors = run_combo_study(study)
    text = combo_rows_to_csv(rows, config={"study": Path(args.study).name})
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for name, message in errors:
        print(f"error: {name}: {message}", file=sys.stderr)
    return 0 if not errors else 1


def _cmd_time(args) -> int:
    records, summaries, rejects = ingest_timing_csv(args.csv)
    for line_no, reason in rejects:
        print(f"warning: line {line_no} rejected: {reason}", file=sys.stderr)
    if not records:
        print("warning: no valid timing rows", file=sys.stderr)
    for summary in summaries:
        if summary.median_saving is None:
            print(f"{summary.channel}: no data")
        else:
            print(f"{summary.channel}: median time saving {round(100 * summary.median_saving)}% (n={summary.n})")
    if args.out:
        lines = ["channel,n,median_saving_fraction"]
        for s in summaries:
            value = "" if s.median_saving is None else str(s.median_saving)
            lines.append(f"{s.channel},{s.n},{value}")
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def _cmd_phantom(args) -> int:
    spec = CohortSpec.from_json(args.spec)
    manifest = generate_cohort(spec, args.out)
    print(f"generated {len(manifest)} cases -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    records, config = read_metrics_csv(args.metrics)
    rows = aggregate(records, axis="none")
    if args.manifest:
        manifest = read_manifest(args.manifest)
        rows += aggregate(records, axis="tumour_type", manifest=manifest)
        rows += aggregate(records, axis="location", manifest=manifest)
    text = aggregates_to_csv(rows, config) if args.format == "csv" else render_report_md(rows, config)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "postprocess": _cmd_postprocess,
    "evaluate": _cmd_evaluate,
    "agree": _cmd_agree,
    "combos": _cmd_combos,
    "time": _cmd_time,
    "phantom": _cmd_phantom,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
