import json

import numpy as np
import pytest

from tumorkit.cli import main
from tumorkit.metrics import read_metrics_csv
from tumorkit.nifti import load_label, save_nifti
from tumorkit.phantom import (
    CohortSpec,
    Perturbation,
    PhantomSpec,
    generate_cohort,
    generate_phantom,
    perturb,
)
from tumorkit.volume import LabelVolume, VolumeGeometry
from tumorkit.workflow import (
    EvaluationOptions,
    discover_cases,
    load_label_set,
    postprocess_tree,
    run_evaluation,
)


def _write_case(root, case_id, vol, name="seg.nii.gz"):
    save_nifti(vol, root / case_id / name)


def _phantom(seed=1, **overrides):
    # Region radii chosen so every true region holds >= 125 voxels and
    # survives default-threshold filtering.
    base = dict(
        shape=(24, 24, 24), spacing=(1.0, 1.0, 1.0), centre=(11.5, 11.5, 11.5),
        t2h_radius_mm=9.0, et_shell_mm=2.5, cc_core_radius_mm=3.5, seed=seed,
    )
    base.update(overrides)
    labels, _ = generate_phantom(PhantomSpec(**base))
    return labels


class TestDiscovery:
    def test_discover_prefers_pred_then_seg(self, tmp_path):
        vol = _phantom()
        _write_case(tmp_path, "c1", vol, "seg.nii.gz")
        _write_case(tmp_path, "c2", vol, "pred.nii.gz")
        cases = discover_cases(tmp_path)
        assert set(cases) == {"c1", "c2"}
        assert cases["c1"].name == "seg.nii.gz"
        assert cases["c2"].name == "pred.nii.gz"

    def test_missing_root(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            discover_cases(tmp_path / "nope")

    def test_load_label_set(self, tmp_path):
        vol = _phantom()
        _write_case(tmp_path, "c1", vol)
        loaded = load_label_set(tmp_path)
        assert np.array_equal(loaded["c1"].codes, vol.codes)


class TestRunEvaluation:
    def test_identical_trees_score_perfectly(self, tmp_path):
        vol = _phantom()
        for case in ("a", "b", "c"):
            _write_case(tmp_path / "ref", case, vol)
            _write_case(tmp_path / "pred", case, vol, "pred.nii.gz")
        result = run_evaluation(tmp_path / "pred", tmp_path / "ref")
        assert result.ok
        overall = {(r.metric, r.channel): r for r in result.aggregates}
        for channel in ("T2H", "ET", "CC", "WT"):
            assert overall[("dsc", channel)].median == 1.0
            assert overall[("vol_diff_pct", channel)].median == 0.0

    def test_filtering_improves_speckled_predictions(self, tmp_path):
        gt = _phantom()
        speckled = perturb(gt, Perturbation(kind="speckle", count=5, size=30, channel="ET", seed=4))
        for case in ("a", "b"):
            _write_case(tmp_path / "ref", case, gt)
            _write_case(tmp_path / "pred", case, speckled, "pred.nii.gz")
        plain = run_evaluation(tmp_path / "pred", tmp_path / "ref")
        filtered = run_evaluation(
            tmp_path / "pred", tmp_path / "ref",
            options=EvaluationOptions(apply_filter=True, threshold_voxels=125),
        )
        et_plain = [r for r in plain.aggregates if r.metric == "dsc" and r.channel == "ET"][0]
        et_filtered = [r for r in filtered.aggregates if r.metric == "dsc" and r.channel == "ET"][0]
        assert et_filtered.median >= et_plain.median
        assert et_filtered.median == 1.0

    def test_missing_case_is_error_not_crash(self, tmp_path):
        vol = _phantom()
        _write_case(tmp_path / "ref", "a", vol)
        _write_case(tmp_path / "ref", "b", vol)
        _write_case(tmp_path / "pred", "a", vol, "pred.nii.gz")
        result = run_evaluation(tmp_path / "pred", tmp_path / "ref")
        assert not result.ok
        assert result.errors == [("b", "reference present but prediction missing")]
        assert {r.case_id for r in result.records} == {"a"}

    def test_geometry_mismatch_reported_per_case(self, tmp_path):
        vol = _phantom()
        other = LabelVolume(
            VolumeGeometry.isotropic((24, 24, 24), 2.0),
            np.asarray(vol.codes),
        )
        _write_case(tmp_path / "ref", "a", vol)
        _write_case(tmp_path / "pred", "a", other, "pred.nii.gz")
        _write_case(tmp_path / "ref", "b", vol)
        _write_case(tmp_path / "pred", "b", vol, "pred.nii.gz")
        result = run_evaluation(tmp_path / "pred", tmp_path / "ref")
        assert len(result.errors) == 1 and result.errors[0][0] == "a"
        assert {r.case_id for r in result.records} == {"b"}

    def test_outputs_embed_provenance(self, tmp_path):
        vol = _phantom()
        _write_case(tmp_path / "ref", "a", vol)
        _write_case(tmp_path / "pred", "a", vol, "pred.nii.gz")
        options = EvaluationOptions(apply_filter=True, threshold_voxels=99, connectivity=18)
        run_evaluation(tmp_path / "pred", tmp_path / "ref", options=options, out_dir=tmp_path / "out")
        _, config = read_metrics_csv(tmp_path / "out" / "metrics.csv")
        assert config["threshold_voxels"] == "99"
        assert config["connectivity"] == "18"
        assert config["filter"] == "on"

    def test_stratified_aggregates(self, tmp_path):
        spec = CohortSpec(seed=3, cases=5, shape=(20, 20, 20), t2h_radius_mm=(5.0, 7.0))
        manifest = generate_cohort(spec, tmp_path)
        options = EvaluationOptions(stratify="tumour_type")
        result = run_evaluation(tmp_path / "pred", tmp_path / "ref", manifest, options)
        axes = {r.axis for r in result.aggregates}
        assert axes == {"none", "tumour_type"}


class TestPostprocessTree:
    def test_filters_each_case(self, tmp_path):
        gt = _phantom()
        speckled = perturb(gt, Perturbation(kind="speckle", count=3, size=20, channel="CC", seed=8))
        _write_case(tmp_path / "in", "a", speckled, "pred.nii.gz")
        cases = postprocess_tree(tmp_path / "in", tmp_path / "out", threshold_voxels=125)
        assert cases == ["a"]
        cleaned = load_label(tmp_path / "out" / "a" / "pred.nii.gz")
        assert np.array_equal(cleaned.codes, gt.codes)


def _make_eval_fixture(tmp_path, cases=3):
    spec = CohortSpec(
        seed=17, cases=cases, shape=(24, 24, 24),
        t2h_radius_mm=(9.0, 10.0), et_shell_mm=(2.0, 2.5), cc_core_radius_mm=(3.5, 4.0),
        et_fraction=1.0, cc_fraction=1.0,
        perturbations=(Perturbation(kind="speckle", count=3, size=40, channel="ET"),),
    )
    generate_cohort(spec, tmp_path)
    return tmp_path / "pred", tmp_path / "ref", tmp_path / "manifest.csv"


class TestCli:
    def test_phantom_and_evaluate_and_report(self, tmp_path, capsys):
        spec_file = tmp_path / "cohort.json"
        spec_file.write_text(
            json.dumps({"seed": 9, "cases": 3, "shape": [24, 24, 24],
                        "t2h_radius_mm": [6.0, 8.0],
                        "perturbations": [{"kind": "translate", "offset": [1, 0, 0]}]}),
            encoding="utf-8",
        )
        assert main(["phantom", "--spec", str(spec_file), "--out", str(tmp_path / "cohort")]) == 0
        assert (tmp_path / "cohort" / "manifest.csv").is_file()

        code = main([
            "evaluate",
            "--pred", str(tmp_path / "cohort" / "pred"),
            "--ref", str(tmp_path / "cohort" / "ref"),
            "--manifest", str(tmp_path / "cohort" / "manifest.csv"),
            "--stratify", "type",
            "--out", str(tmp_path / "run"),
        ])
        assert code == 0
        assert (tmp_path / "run" / "metrics.csv").is_file()
        assert (tmp_path / "run" / "aggregates.csv").is_file()

        code = main([
            "report", "--metrics", str(tmp_path / "run" / "metrics.csv"),
            "--manifest", str(tmp_path / "cohort" / "manifest.csv"),
            "--format", "md", "--out", str(tmp_path / "report.md"),
        ])
        assert code == 0
        text = (tmp_path / "report.md").read_text(encoding="utf-8")
        assert "| Stratum |" in text
        assert "by tumour type" in text and "by location" in text

    def test_postprocess_cli(self, tmp_path):
        pred, ref, _ = _make_eval_fixture(tmp_path)
        code = main([
            "postprocess", "--in", str(pred), "--out", str(tmp_path / "clean"),
            "--threshold", "125", "--connectivity", "26", "--channels", "ET,CC",
        ])
        assert code == 0
        cleaned = load_label_set(tmp_path / "clean")
        originals = load_label_set(ref)
        for case_id, vol in cleaned.items():
            assert np.array_equal(vol.codes, originals[case_id].codes)

    def test_evaluate_missing_case_nonzero_exit(self, tmp_path):
        pred, ref, manifest = _make_eval_fixture(tmp_path)
        extra = _phantom(seed=99)
        _write_case(ref, "case-9999", extra)
        code = main(["evaluate", "--pred", str(pred), "--ref", str(ref), "--out", str(tmp_path / "run")])
        assert code == 1
        assert (tmp_path / "run" / "errors.csv").is_file()

    def test_evaluate_stratify_without_manifest_fails(self, tmp_path):
        pred, ref, _ = _make_eval_fixture(tmp_path)
        code = main(["evaluate", "--pred", str(pred), "--ref", str(ref),
                     "--stratify", "type", "--out", str(tmp_path / "run")])
        assert code == 2

    def test_agree_cli(self, tmp_path, capsys):
        vol = _phantom()
        bigger = perturb(vol, Perturbation(kind="dilate", iterations=1))
        for case in ("r1", "r2"):
            _write_case(tmp_path / "rater_a", case, vol)
            _write_case(tmp_path / "rater_b", case, bigger)
        code = main(["agree", "--a", str(tmp_path / "rater_a"), "--b", str(tmp_path / "rater_b"),
                     "--out", str(tmp_path / "agreement")])
        assert code == 0
        out = capsys.readouterr().out
        assert "T2H: DSC median" in out
        records, config = read_metrics_csv(tmp_path / "agreement" / "metrics.csv")
        assert config["mode"] == "agreement"
        assert all(0.0 < r.dsc < 1.0 for r in records if r.channel == "T2H")

    def test_time_cli(self, tmp_path, capsys):
        csv_path = tmp_path / "times.csv"
        csv_path.write_text(
            "case_id,channel,t_manual_s,t_ai_adjusted_s\n"
            "c1,T2H,2905,494\nc1,ET,1581,912\nc1,CC,1374,1008\n",
            encoding="utf-8",
        )
        code = main(["time", "--csv", str(csv_path), "--out", str(tmp_path / "summary.csv")])
        assert code == 0
        out = capsys.readouterr().out
        assert "T2H: median time saving 83%" in out
        assert "ET: median time saving 42%" in out
        assert "CC: median time saving 27%" in out
        summary = (tmp_path / "summary.csv").read_text(encoding="utf-8")
        assert summary.startswith("channel,n,median_saving_fraction\n")

    def test_combos_cli(self, tmp_path):
        gt = _phantom()
        worse = perturb(gt, Perturbation(kind="erode", iterations=1))
        for case in ("a", "b"):
            _write_case(tmp_path / "ref", case, gt)
            _write_case(tmp_path / "combo_full", case, gt, "pred.nii.gz")
            _write_case(tmp_path / "combo_small", case, worse, "pred.nii.gz")
        study_file = tmp_path / "study.json"
        study_file.write_text(
            json.dumps({
                "ref": "ref",
                "combos": {"T1-C+T1+T2+FLAIR": "combo_full", "T2 + T1": "combo_small"},
            }),
            encoding="utf-8",
        )
        out_csv = tmp_path / "combos.csv"
        code = main(["combos", "--study", str(study_file), "--out", str(out_csv)])
        assert code == 0
        lines = [ln for ln in out_csv.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
        assert lines[0] == "combo,channel,n,median,sd"
        rows = {}
        for ln in lines[1:]:
            combo, channel, n, median, sd = ln.split(",")
            rows[(combo, channel)] = median
        # Canonical key from "T2 + T1" is "T1+T2".
        assert ("T1+T2", "WT") in rows
        assert float(rows[("T1+T1-C+T2+FLAIR", "WT")]) == 1.0
        assert float(rows[("T1+T2", "WT")]) < 1.0


class TestDeterminism:
    def test_two_runs_byte_identical(self, tmp_path):
        pred, ref, manifest = _make_eval_fixture(tmp_path)
        for run in ("run1", "run2"):
            code = main([
                "evaluate", "--pred", str(pred), "--ref", str(ref),
                "--manifest", str(manifest), "--stratify", "location",
                "--filter", "--out", str(tmp_path / run),
            ])
            assert code == 0
        for name in ("metrics.csv", "aggregates.csv"):
            a = (tmp_path / "run1" / name).read_bytes()
            b = (tmp_path / "run2" / name).read_bytes()
            assert a == b
