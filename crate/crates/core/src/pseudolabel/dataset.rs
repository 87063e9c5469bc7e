//! Offline pseudo-labeling of a whole dataset from a tensor directory.

use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_pseudo_labels, PipelineParams, PseudoLabel};
use crate::error::{Error, Result};
use crate::tensor::read_tensor_file;
use crate::types::{BoundingBox, Category, ClassId, Dataset, ImageId, ImageRecord};

/// COCO annotation with pseudo-label provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoAnnotation {
    pub id: u64,
    pub image_id: ImageId,
    pub category_id: ClassId,
    /// `[x, y, width, height]`.
    pub bbox: [f64; 4],
    pub area: f64,
    pub iscrowd: u8,
    pub source_cluster: usize,
    pub mean_activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelDocument {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<PseudoAnnotation>,
    pub categories: Vec<Category>,
}

impl PseudoLabelDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedImage {
    pub image_id: ImageId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageSummary {
    pub image_id: ImageId,
    pub labels: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PseudoLabelReport {
    pub processed: Vec<ImageSummary>,
    pub skipped: Vec<SkippedImage>,
}

enum Outcome {
    Labels(Vec<PseudoLabel>),
    Skipped(String),
}

fn process_image(tensor_dir: &Path, image: &ImageRecord, gts: &[BoundingBox], params: &PipelineParams) -> Result<Outcome> {
    let feat_path = tensor_dir.join(format!("{}.feat", image.id));
    let attn_path = tensor_dir.join(format!("{}.attn", image.id));
    let missing: Vec<String> = [&feat_path, &attn_path]
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Ok(Outcome::Skipped(format!("missing tensor file(s): {}", missing.join(", "))));
    }
    let features = read_tensor_file(&feat_path)?.into_feature()?;
    let attention = read_tensor_file(&attn_path)?.into_attention()?;
    let labels = generate_pseudo_labels(&features, &attention, gts, Some((image.width, image.height)), params)
        .map_err(|e| Error::Data(format!("image {}: {e}", image.id)))?;
    Ok(Outcome::Labels(labels))
}

/// Runs the pipeline for every image of `dataset`, reading
/// `<image_id>.feat` and `<image_id>.attn` from `tensor_dir`.
///
/// Images without both files are skipped and listed in the report. Images
/// are processed in parallel; the output is ordered by image id, with
/// annotation ids numbered from 1, so it does not depend on the pool size.
/// Every annotation of `dataset` on an image serves as a ground truth for
/// the overlap filter.
pub fn pseudolabel_dataset(
    tensor_dir: &Path,
    dataset: &Dataset,
    params: &PipelineParams,
    unknown_id: ClassId,
) -> Result<(PseudoLabelDocument, PseudoLabelReport)> {
    params.validate()?;
    if !tensor_dir.is_dir() {
        return Err(Error::InvalidInput(format!(
            "tensor directory {} does not exist",
            tensor_dir.display()
        )));
    }
    let by_image = dataset.ground_truths_by_image();
    let mut images: Vec<&ImageRecord> = dataset.images.iter().collect();
    images.sort_by_key(|im| im.id);

    let outcomes: Vec<Result<Outcome>> = images
        .par_iter()
        .map(|image| {
            let gts: Vec<BoundingBox> = by_image
                .get(&image.id)
                .map(|v| v.iter().map(|g| g.bbox).collect())
                .unwrap_or_default();
            process_image(tensor_dir, image, &gts, params)
        })
        .collect();

    let mut doc = PseudoLabelDocument {
        images: Vec::new(),
        annotations: Vec::new(),
        categories: vec![Category {
            id: unknown_id,
            name: crate::taxonomy::UNKNOWN_LABEL.to_string(),
            supercategory: None,
        }],
    };
    let mut report = PseudoLabelReport::default();
    for (image, outcome) in images.iter().zip(outcomes) {
        match outcome? {
            Outcome::Skipped(reason) => {
                warn!("skipping image {}: {reason}", image.id);
                report.skipped.push(SkippedImage {
                    image_id: image.id,
                    reason,
                });
            }
            Outcome::Labels(labels) => {
                report.processed.push(ImageSummary {
                    image_id: image.id,
                    labels: labels.len(),
                });
                doc.images.push((*image).clone());
                for label in labels {
                    doc.annotations.push(PseudoAnnotation {
                        id: doc.annotations.len() as u64 + 1,
                        image_id: image.id,
                        category_id: unknown_id,
                        bbox: label.bbox.to_xywh(),
                        area: label.bbox.area(),
                        iscrowd: 0,
                        source_cluster: label.source_cluster,
                        mean_activation: label.mean_activation,
                    });
                }
            }
        }
    }
    info!(
        "pseudo-labeled {} image(s), {} box(es), {} skipped",
        report.processed.len(),
        doc.annotations.len(),
        report.skipped.len()
    );
    Ok((doc, report))
}
