//! Fixture writers and a runner for the `osodbench` binary.
#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
pub mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use osodbench::coco::{dataset_to_string, detections_to_string};
use osodbench::types::ImageRecord;
use osodbench::Dataset;

pub const TENSOR_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/tensors");
pub const PSEUDO_ANNOTATIONS: &str =
    concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/pseudolabel_annotations.json");

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osodbench"))
        .args(args)
        .env_remove("OSODBENCH_WORKERS")
        .output()
        .expect("spawn osodbench")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Paths of an evaluation problem written to disk.
pub struct EvalInputs {
    pub annotations: PathBuf,
    pub detections: PathBuf,
    pub partition: PathBuf,
    pub taxonomy: PathBuf,
}

/// Concatenates seeded random instances into one test set. Every third
/// instance is pure OOD, so all three splits are populated.
pub fn write_eval_inputs(dir: &Path, instances: u64) -> EvalInputs {
    let mut ds = Dataset::default();
    let mut dets = Vec::new();
    let (mut next_image, mut next_gt) = (0, 0);
    for seed in 0..instances {
        let inst = common::random_instance(seed, seed % 3 == 0);
        let base_image = next_image;
        for im in &inst.dataset.images {
            ds.images.push(ImageRecord { id: base_image + im.id, ..im.clone() });
            next_image = next_image.max(base_image + im.id);
        }
        for g in &inst.dataset.ground_truths {
            next_gt += 1;
            let mut g = g.clone();
            g.id = next_gt;
            g.image_id += base_image;
            ds.ground_truths.push(g);
        }
        for d in &inst.detections {
            let mut d = d.clone();
            d.image_id += base_image;
            dets.push(d);
        }
    }
    let inputs = EvalInputs {
        annotations: dir.join("annotations.json"),
        detections: dir.join("detections.json"),
        partition: dir.join("partition.json"),
        taxonomy: dir.join("taxonomy.json"),
    };
    fs::write(&inputs.annotations, dataset_to_string(&ds)).unwrap();
    fs::write(&inputs.detections, detections_to_string(&dets)).unwrap();
    fs::write(&inputs.partition, serde_json::to_string(&common::partition()).unwrap()).unwrap();
    fs::write(&inputs.taxonomy, common::TAXONOMY_JSON).unwrap();
    inputs
}

/// Every file under `dir` with its bytes, in path order.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = fs::read(&p).unwrap();
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}
