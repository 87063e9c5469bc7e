use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use osodbench::coco::{parse_annotations, parse_detections, LoadReport};
use osodbench::metrics::{evaluate as run_evaluation, EvalOptions, Interpolation, MetricName, SplitName};
use osodbench::pseudolabel::{pseudolabel_dataset, PipelineParams};
use osodbench::splits::{build_benchmark, segment_test_splits, validate_scenario as check_scenario, Scenario, SplitRecipe};
use osodbench::taxonomy::parse_taxonomy;
use osodbench::{ClassId, ClassPartition, Dataset, Error};

use crate::{BuildSplitsArgs, Claim, EvaluateArgs, PseudolabelArgs, ValidateArgs};

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_SCENARIO: u8 = 3;

/// Metric preconditions map to 2; every other failure is an input error.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let precondition = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<Error>(), Some(Error::Precondition(_))));
    if precondition {
        EXIT_PRECONDITION
    } else {
        EXIT_INPUT
    }
}

fn load_annotations(path: &Path) -> Result<Dataset> {
    let (ds, report) = parse_annotations(path).with_context(|| format!("loading annotations {}", path.display()))?;
    log_load_report(path, &report);
    Ok(ds)
}

fn log_load_report(path: &Path, report: &LoadReport) {
    for r in &report.rejected {
        warn!("{}: annotation {} rejected: {}", path.display(), r.annotation_id, r.reason);
    }
    if !report.clamped.is_empty() {
        warn!(
            "{}: {} annotation(s) clamped to image bounds",
            path.display(),
            report.clamped.len()
        );
    }
}

/// Reads a partition document, or the `partition` member of a splits file.
fn load_partition(path: &Path) -> Result<ClassPartition> {
    let text = fs::read_to_string(path).with_context(|| format!("reading partition {}", path.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing partition {}", path.display()))?;
    if let Some(inner) = value.get_mut("partition") {
        value = inner.take();
    }
    serde_json::from_value(value).with_context(|| format!("decoding partition {}", path.display()))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

fn output_dir(out: &Option<PathBuf>, dry_run: bool) -> Result<Option<&Path>> {
    match (out, dry_run) {
        (_, true) => Ok(None),
        (Some(dir), false) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Ok(Some(dir.as_path()))
        }
        (None, false) => bail!("--out is required unless --dry-run is given"),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn evaluate(args: &EvaluateArgs, dry_run: bool) -> Result<ExitCode> {
    let dataset = load_annotations(&args.annotations)?;
    let partition = load_partition(&args.partition)?;
    let detections = parse_detections(&args.detections, Some(&partition))
        .with_context(|| format!("loading detections {}", args.detections.display()))?;
    let taxonomy = args
        .taxonomy
        .as_ref()
        .map(|p| parse_taxonomy(p).with_context(|| format!("loading taxonomy {}", p.display())))
        .transpose()?;
    let splits = args
        .split
        .iter()
        .map(|s| SplitName::parse(s))
        .collect::<osodbench::Result<Vec<_>>>()?;
    let metrics = args
        .metrics
        .as_ref()
        .map(|m| m.iter().map(|s| MetricName::parse(s)).collect::<osodbench::Result<Vec<_>>>())
        .transpose()?;
    let options = EvalOptions {
        iou_threshold: args.iou_thresh,
        strict_iou: args.strict_iou,
        interpolation: if args.eleven_point {
            Interpolation::ElevenPoint
        } else {
            Interpolation::AllPoint
        },
        score_thresholds: args.score_thresh.clone(),
        splits,
        metrics,
        include_wi: args.wi,
        include_curves: true,
    };
    let split_set = segment_test_splits(&dataset, &partition)?;
    let report = run_evaluation(&dataset, &detections, taxonomy.as_ref(), &partition, &split_set, &options)?;

    for (split, r) in &report.splits {
        for (name, v) in &r.metrics {
            println!("{:<4} {:<9} {:.4}", split.as_str(), name, v);
        }
        for row in &r.thresholded {
            let t = row.score_threshold;
            if let Some(v) = row.u_recall {
                println!("{:<4} {:<9} {:.4}  (score >= {t})", split.as_str(), "U-Recall", v);
            }
            if let Some(v) = row.a_ose {
                println!("{:<4} {:<9} {v}  (score >= {t})", split.as_str(), "A-OSE");
            }
            if let Some(v) = row.wi {
                println!("{:<4} {:<9} {:.4}  (score >= {t})", split.as_str(), "WI", v);
            }
        }
        for note in &r.notes {
            println!("{:<4} note: {note}", split.as_str());
        }
    }

    if let Some(dir) = output_dir(&args.out, dry_run)? {
        write(dir, "report.json", &report.to_json())?;
        write(dir, "metrics.csv", &report.to_csv())?;
        if args.plots {
            for (stem, svg) in report.curve_svgs() {
                write(dir, &format!("plots/{stem}.svg"), &svg)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn build_splits(args: &BuildSplitsArgs, dry_run: bool) -> Result<ExitCode> {
    let dump = load_annotations(&args.annotations)?;
    let taxonomy = parse_taxonomy(&args.taxonomy).with_context(|| format!("loading taxonomy {}", args.taxonomy.display()))?;
    let recipe: SplitRecipe = match &args.recipe {
        Some(p) => load_json(p, "recipe")?,
        None => SplitRecipe::default(),
    };
    let bench = build_benchmark(&dump, &taxonomy, &recipe)?;
    let s = &bench.statistics;
    println!(
        "images {}  objects {}  known classes {}  unknown classes {}",
        s.images, s.objects, s.known_classes, s.unknown_classes
    );
    println!(
        "test splits: id {}  ood {}  all {}",
        bench.splits.id_images.len(),
        bench.splits.ood_images.len(),
        bench.splits.all_images.len()
    );

    if let Some(dir) = output_dir(&args.out, dry_run)? {
        write(dir, "partition.json", &to_json(&bench.partition))?;
        write(
            dir,
            "splits.json",
            &to_json(&serde_json::json!({ "partition": bench.partition, "splits": bench.splits })),
        )?;
        write(dir, "statistics.json", &to_json(&bench.statistics))?;
        write(dir, "recipe.json", &to_json(&recipe))?;
        write(dir, "annotations.json", &osodbench::coco::dataset_to_string(&bench.dataset))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn has_tensors(dir: &Path) -> Result<bool> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading tensor directory {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if matches!(path.extension().and_then(|e| e.to_str()), Some("feat" | "attn")) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Reserved unknown id: from the partition when given, else one past the
/// largest category or annotated class id.
fn pseudo_unknown_id(dataset: &Dataset, partition: Option<&ClassPartition>) -> ClassId {
    if let Some(p) = partition {
        return p.unknown_id();
    }
    let max_category = dataset.categories.iter().map(|c| c.id).max();
    let max_annotated = dataset.ground_truths.iter().map(|g| g.class_id).max();
    max_category.max(max_annotated).map_or(1, |m| m + 1)
}

pub fn pseudolabel(args: &PseudolabelArgs, dry_run: bool) -> Result<ExitCode> {
    let dataset = load_annotations(&args.annotations)?;
    let params = match &args.params {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading params {}", p.display()))?;
            PipelineParams::from_json(&text).with_context(|| format!("loading params {}", p.display()))?
        }
        None => PipelineParams::default(),
    };
    params.validate()?;
    if !has_tensors(&args.tensors)? {
        bail!("tensor directory {} holds no .feat or .attn files", args.tensors.display());
    }
    let partition = args.partition.as_deref().map(load_partition).transpose()?;
    let unknown_id = pseudo_unknown_id(&dataset, partition.as_ref());

    let (doc, report) = pseudolabel_dataset(&args.tensors, &dataset, &params, unknown_id)?;
    for s in &report.processed {
        println!("image {:>8}  {} pseudo-label(s)", s.image_id, s.labels);
    }
    for s in &report.skipped {
        println!("image {:>8}  skipped: {}", s.image_id, s.reason);
    }
    println!(
        "total {} pseudo-label(s) over {} image(s), {} skipped",
        doc.annotations.len(),
        report.processed.len(),
        report.skipped.len()
    );

    if let Some(dir) = output_dir(&args.out, dry_run)? {
        write(dir, "pseudo_labels.json", &doc.to_json())?;
        write(dir, "pseudolabel_report.json", &to_json(&report))?;
        write(dir, "params.json", &to_json(&params))?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn validate_scenario(args: &ValidateArgs, dry_run: bool) -> Result<ExitCode> {
    let train = load_annotations(&args.annotations)?;
    let partition = load_partition(&args.partition)?;
    let claim = match args.claim {
        Claim::Unseen => Scenario::Unseen,
        Claim::Unlabeled => Scenario::Unlabeled,
    };
    let report = check_scenario(&train, &partition, claim);
    if claim == Scenario::Unseen {
        for v in &report.violations {
            println!(
                "violation: annotation {} in image {} has unknown class {}",
                v.annotation_id, v.image_id, v.class_id
            );
        }
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("scenario {}", if report.verified { "verified" } else { "violated" });

    if args.out.is_some() {
        if let Some(dir) = output_dir(&args.out, dry_run)? {
            write(dir, "scenario.json", &to_json(&report))?;
        }
    }
    Ok(if report.verified {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SCENARIO)
    })
}
