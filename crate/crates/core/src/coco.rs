//! COCO-style annotation and detection-result documents.
//!
//! Boxes are stored as `[x, y, width, height]` on disk and converted to
//! corner form on load.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::types::{
    BoundingBox, Category, ClassId, ClassPartition, Dataset, Detection, GroundTruthObject, ImageId,
    ImageRecord,
};

/// Records that were altered or dropped while loading an annotation file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub rejected: Vec<RejectedRecord>,
    /// Annotation ids whose box was clamped to the image bounds.
    pub clamped: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRecord {
    pub annotation_id: u64,
    pub reason: String,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty() && self.clamped.is_empty()
    }
}

#[derive(Deserialize)]
struct RawDocument {
    #[serde(default)]
    images: Vec<Value>,
    #[serde(default)]
    annotations: Vec<Value>,
    #[serde(default)]
    categories: Vec<Value>,
}

/// One annotation record as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: u64,
    pub image_id: ImageId,
    pub category_id: ClassId,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iscrowd: Option<u8>,
}

/// Serializable annotation document, used to write datasets back out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AnnotationRecord>,
    pub categories: Vec<Category>,
}

impl From<&Dataset> for AnnotationDocument {
    fn from(ds: &Dataset) -> Self {
        AnnotationDocument {
            images: ds.images.clone(),
            annotations: ds
                .ground_truths
                .iter()
                .map(|gt| AnnotationRecord {
                    id: gt.id,
                    image_id: gt.image_id,
                    category_id: gt.class_id,
                    bbox: gt.bbox.to_xywh(),
                    area: Some(gt.bbox.area()),
                    iscrowd: Some(0),
                })
                .collect(),
            categories: ds.categories.clone(),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn decode<T: serde::de::DeserializeOwned>(value: Value, context: impl FnOnce() -> String) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::parse(context(), e))
}

pub fn parse_annotations(path: impl AsRef<Path>) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    parse_annotations_str(&read_to_string(path)?)
}

/// Parses an annotation document held in memory.
///
/// Zero-area boxes are rejected into the [`LoadReport`]; boxes leaving the
/// image are clamped, with a warning. An annotation pointing at a missing
/// image is a hard error.
pub fn parse_annotations_str(text: &str) -> Result<(Dataset, LoadReport)> {
    let raw: RawDocument =
        serde_json::from_str(text).map_err(|e| Error::parse("annotation document", e))?;

    let mut images = Vec::with_capacity(raw.images.len());
    let mut seen = BTreeSet::new();
    for (i, v) in raw.images.into_iter().enumerate() {
        let im: ImageRecord = decode(v, || format!("images[{i}]"))?;
        if !seen.insert(im.id) {
            return Err(Error::parse(format!("images[{i}]"), format!("duplicate image id {}", im.id)));
        }
        images.push(im);
    }

    let categories = raw
        .categories
        .into_iter()
        .enumerate()
        .map(|(i, v)| decode::<Category>(v, || format!("categories[{i}]")))
        .collect::<Result<Vec<_>>>()?;

    let mut report = LoadReport::default();
    let mut ground_truths = Vec::with_capacity(raw.annotations.len());
    for (i, v) in raw.annotations.into_iter().enumerate() {
        let rec: AnnotationRecord = decode(v, || format!("annotations[{i}]"))?;
        let Some(image) = images.iter().find(|im| im.id == rec.image_id) else {
            return Err(Error::parse(
                format!("annotation id {}", rec.id),
                format!("references missing image id {}", rec.image_id),
            ));
        };
        let [x, y, w, h] = rec.bbox;
        let bbox = match BoundingBox::from_xywh(x, y, w, h) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("rejecting annotation {}: {e}", rec.id);
                report.rejected.push(RejectedRecord {
                    annotation_id: rec.id,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let (iw, ih) = (f64::from(image.width), f64::from(image.height));
        let bbox = if bbox.is_within(iw, ih) {
            bbox
        } else {
            match bbox.clamp_to(iw, ih) {
                Some(c) => {
                    log::warn!("annotation {} clamped to image {} bounds", rec.id, image.id);
                    report.clamped.push(rec.id);
                    c
                }
                None => {
                    log::warn!("rejecting annotation {}: box lies outside image {}", rec.id, image.id);
                    report.rejected.push(RejectedRecord {
                        annotation_id: rec.id,
                        reason: format!("box lies outside image {}", image.id),
                    });
                    continue;
                }
            }
        };
        ground_truths.push(GroundTruthObject {
            id: rec.id,
            image_id: rec.image_id,
            class_id: rec.category_id,
            bbox,
        });
    }

    Ok((
        Dataset {
            images,
            ground_truths,
            categories,
        },
        report,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: ImageId,
    pub category_id: ClassId,
    pub bbox: [f64; 4],
    pub score: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        DetectionRecord {
            image_id: d.image_id,
            category_id: d.class_id,
            bbox: d.bbox.to_xywh(),
            score: d.score,
        }
    }
}

pub fn parse_detections(
    path: impl AsRef<Path>,
    partition: Option<&ClassPartition>,
) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    parse_detections_str(&read_to_string(path)?, partition)
}

/// Parses a COCO results list. Record order is preserved. With a partition,
/// every category must be a known class, an unknown class or the reserved
/// unknown label.
pub fn parse_detections_str(text: &str, partition: Option<&ClassPartition>) -> Result<Vec<Detection>> {
    let raw: Vec<Value> = serde_json::from_str(text).map_err(|e| Error::parse("detection document", e))?;
    raw.into_iter()
        .enumerate()
        .map(|(i, v)| {
            let ctx = || format!("detections[{i}]");
            let rec: DetectionRecord = decode(v, ctx)?;
            if !(0.0..=1.0).contains(&rec.score) {
                return Err(Error::parse(ctx(), format!("score {} outside [0, 1]", rec.score)));
            }
            if let Some(p) = partition {
                if p.kind(rec.category_id).is_none() {
                    return Err(Error::parse(
                        ctx(),
                        format!("category id {} is neither known nor unknown", rec.category_id),
                    ));
                }
            }
            let [x, y, w, h] = rec.bbox;
            let bbox = BoundingBox::from_xywh(x, y, w, h).map_err(|e| Error::parse(ctx(), e))?;
            Ok(Detection {
                image_id: rec.image_id,
                class_id: rec.category_id,
                score: rec.score,
                bbox,
            })
        })
        .collect()
}

pub fn detections_to_string(detections: &[Detection]) -> String {
    let records: Vec<DetectionRecord> = detections.iter().map(DetectionRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("detection records serialize")
}

pub fn dataset_to_string(dataset: &Dataset) -> String {
    serde_json::to_string_pretty(&AnnotationDocument::from(dataset)).expect("annotation document serializes")
}
