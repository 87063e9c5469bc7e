mod support;

use std::fs;

use support::{path_str, run, stderr, stdout, write_eval_inputs, EvalInputs, PSEUDO_ANNOTATIONS, TENSOR_DIR};

fn evaluate(inputs: &EvalInputs, extra: &[&str]) -> std::process::Output {
    let mut args = vec![
        "evaluate",
        "--annotations", path_str(&inputs.annotations),
        "--detections", path_str(&inputs.detections),
        "--partition", path_str(&inputs.partition),
        "--taxonomy", path_str(&inputs.taxonomy),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn evaluate_reports_every_split() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_eval_inputs(dir.path(), 30);
    let out = dir.path().join("out");
    let o = evaluate(&inputs, &["--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for split in ["id", "all", "ood"] {
        assert!(report["splits"][split]["metrics"].is_object(), "missing split {split}");
    }
    assert!(report["splits"]["ood"]["metrics"]["AP_sc"].is_number());
    assert!(report["splits"]["id"]["metrics"]["mAP_k"].is_number());
    assert!(fs::read_to_string(out.join("metrics.csv")).unwrap().starts_with("split,metric,score_threshold,value"));
}

#[test]
fn superclass_ap_on_all_split_is_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_eval_inputs(dir.path(), 10);
    let o = evaluate(&inputs, &["--split", "all", "--metrics", "AP_sc", "--dry-run"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn score_threshold_sweep_gives_one_row_per_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_eval_inputs(dir.path(), 30);
    let out = dir.path().join("out");
    let o = evaluate(&inputs, &["--split", "all", "--score-thresh", "0.05,0.3,0.7", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let rows = report["splits"]["all"]["thresholded"].as_array().unwrap();
    let taus: Vec<f64> = rows.iter().map(|r| r["score_threshold"].as_f64().unwrap()).collect();
    assert_eq!(taus, [0.05, 0.3, 0.7]);
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_eval_inputs(dir.path(), 5);
    let out = dir.path().join("out");
    let o = evaluate(&inputs, &["--dry-run", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!out.exists());
    let o = run(&["--dry-run", "pseudolabel", "--annotations", PSEUDO_ANNOTATIONS, "--tensors", TENSOR_DIR, "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn missing_out_without_dry_run_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_eval_inputs(dir.path(), 5);
    assert_eq!(evaluate(&inputs, &[]).status.code(), Some(1));
}

#[test]
fn build_splits_on_empty_selection_fails() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("dump.json");
    let tax = dir.path().join("tax.json");
    fs::write(&dump, r#"{"images":[{"id":1,"width":10,"height":10}],"annotations":[{"id":1,"image_id":1,"category_id":3,"bbox":[1,1,2,2]}],"categories":[]}"#).unwrap();
    fs::write(&tax, support::common::TAXONOMY_JSON).unwrap();
    let o = run(&["build-splits", "--annotations", path_str(&dump), "--taxonomy", path_str(&tax), "--dry-run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no images selected"), "{}", stderr(&o));
}

fn pseudolabel_count(dir: &std::path::Path, t: f64) -> usize {
    let params = dir.join(format!("params-{t}.json"));
    fs::write(&params, format!(r#"{{"T": {t}}}"#)).unwrap();
    let out = dir.join(format!("out-{t}"));
    let o = run(&[
        "pseudolabel", "--annotations", PSEUDO_ANNOTATIONS, "--tensors", TENSOR_DIR,
        "--params", path_str(&params), "--out", path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("pseudo_labels.json")).unwrap()).unwrap();
    doc["annotations"].as_array().unwrap().len()
}

#[test]
fn pseudolabel_fixture_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["pseudolabel", "--annotations", PSEUDO_ANNOTATIONS, "--tensors", TENSOR_DIR, "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("pseudolabel_report.json")).unwrap()).unwrap();
    let per_image: Vec<(u64, u64)> = report["processed"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["image_id"].as_u64().unwrap(), s["labels"].as_u64().unwrap()))
        .collect();
    assert_eq!(per_image, [(1, 1), (2, 0), (3, 0), (4, 1), (5, 2)]);
    let skipped = report["skipped"].as_array().unwrap();
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0]["image_id"], 6);
    assert!(stdout(&o).contains("skipped"));
}

#[test]
fn looser_gt_threshold_keeps_more_labels() {
    let dir = tempfile::tempdir().unwrap();
    let strict = pseudolabel_count(dir.path(), 0.3);
    let loose = pseudolabel_count(dir.path(), 0.9);
    assert!(loose >= strict);
    assert_eq!(loose, strict + 1);
}

#[test]
fn tensor_directory_without_tensors_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["pseudolabel", "--annotations", PSEUDO_ANNOTATIONS, "--tensors", path_str(dir.path()), "--dry-run"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scenario_claims() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_eval_inputs(dir.path(), 3);
    let clean = dir.path().join("clean.json");
    fs::write(&clean, r#"{"images":[{"id":1,"width":10,"height":10}],"annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[1,1,2,2]}],"categories":[]}"#).unwrap();
    let claim = |file: &std::path::Path, c: &str| {
        run(&["validate-scenario", "--annotations", path_str(file), "--partition", path_str(&inputs.partition), "--claim", c])
    };
    let o = claim(&clean, "unseen");
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("scenario verified"));

    let mixed = dir.path().join("mixed.json");
    fs::write(&mixed, r#"{"images":[{"id":1,"width":10,"height":10}],"annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[1,1,2,2]},{"id":2,"image_id":1,"category_id":10,"bbox":[4,4,2,2]}],"categories":[]}"#).unwrap();
    let o = claim(&mixed, "unseen");
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("violation:")).count(), 1);
    let o = claim(&mixed, "unlabeled");
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
