//! Domain types shared by every module.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ImageId = u64;
pub type ClassId = u32;

/// Axis-aligned box in corner form, pixel coordinates.
///
/// Construction through [`BoundingBox::new`] or [`BoundingBox::from_xywh`]
/// guarantees finite coordinates and strictly positive width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite box coordinates {coords:?}")));
        }
        if x_max <= x_min || y_max <= y_min {
            return Err(Error::Data(format!("box {coords:?} has non-positive area")));
        }
        Ok(BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Converts the COCO storage form `[x, y, width, height]`.
    pub fn from_xywh(x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Data(format!(
                "box width/height must be positive, got {width}x{height}"
            )));
        }
        Self::new(x, y, x + width, y + height)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.width(), self.height()]
    }

    /// Area of the overlap with `other`, zero when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Clamps the box to `[0, width] x [0, height]`. Returns `None` when
    /// nothing with positive area remains.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<BoundingBox> {
        BoundingBox::new(
            self.x_min.clamp(0.0, width),
            self.y_min.clamp(0.0, height),
            self.x_max.clamp(0.0, width),
            self.y_max.clamp(0.0, height),
        )
        .ok()
    }

    pub fn is_within(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width && self.y_max <= height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: ImageId,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: ClassId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub id: u64,
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub score: f64,
    pub bbox: BoundingBox,
}

/// Loaded annotation set. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub ground_truths: Vec<GroundTruthObject>,
    pub categories: Vec<Category>,
}

impl Dataset {
    pub fn image_ids(&self) -> BTreeSet<ImageId> {
        self.images.iter().map(|im| im.id).collect()
    }

    pub fn image(&self, id: ImageId) -> Option<&ImageRecord> {
        self.images.iter().find(|im| im.id == id)
    }

    /// Ground truths grouped by image, images without objects included.
    pub fn ground_truths_by_image(&self) -> BTreeMap<ImageId, Vec<&GroundTruthObject>> {
        let mut out: BTreeMap<ImageId, Vec<&GroundTruthObject>> =
            self.images.iter().map(|im| (im.id, Vec::new())).collect();
        for gt in &self.ground_truths {
            out.entry(gt.image_id).or_default().push(gt);
        }
        out
    }

    /// Keeps only the listed images and their objects.
    pub fn restrict_to(&self, images: &BTreeSet<ImageId>) -> Dataset {
        Dataset {
            images: self
                .images
                .iter()
                .filter(|im| images.contains(&im.id))
                .cloned()
                .collect(),
            ground_truths: self
                .ground_truths
                .iter()
                .filter(|gt| images.contains(&gt.image_id))
                .cloned()
                .collect(),
            categories: self.categories.clone(),
        }
    }

    /// Instance count per class id.
    pub fn class_counts(&self) -> BTreeMap<ClassId, u64> {
        let mut counts = BTreeMap::new();
        for gt in &self.ground_truths {
            *counts.entry(gt.class_id).or_insert(0) += 1;
        }
        counts
    }
}

/// Which side of the known/unknown split a label falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Known,
    Unknown,
}

/// Known classes `K` and unknown classes `U`, plus the single reserved label
/// every unknown class collapses to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionDoc", into = "PartitionDoc")]
pub struct ClassPartition {
    known: BTreeSet<ClassId>,
    unknown: BTreeSet<ClassId>,
    unknown_id: ClassId,
}

#[derive(Serialize, Deserialize)]
struct PartitionDoc {
    known: Vec<ClassId>,
    unknown: Vec<ClassId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unknown_id: Option<ClassId>,
}

impl TryFrom<PartitionDoc> for ClassPartition {
    type Error = Error;

    fn try_from(doc: PartitionDoc) -> Result<Self> {
        let partition = ClassPartition::new(doc.known, doc.unknown)?;
        match doc.unknown_id {
            Some(id) => partition.with_unknown_id(id),
            None => Ok(partition),
        }
    }
}

impl From<ClassPartition> for PartitionDoc {
    fn from(p: ClassPartition) -> Self {
        PartitionDoc {
            known: p.known.into_iter().collect(),
            unknown: p.unknown.into_iter().collect(),
            unknown_id: Some(p.unknown_id),
        }
    }
}

impl ClassPartition {
    /// Builds a partition; the reserved unknown label defaults to `C + 1`
    /// where `C` is the largest known id.
    pub fn new(
        known: impl IntoIterator<Item = ClassId>,
        unknown: impl IntoIterator<Item = ClassId>,
    ) -> Result<Self> {
        let known: BTreeSet<_> = known.into_iter().collect();
        let unknown: BTreeSet<_> = unknown.into_iter().collect();
        if let Some(c) = known.intersection(&unknown).next() {
            return Err(Error::InvalidInput(format!(
                "class {c} is listed as both known and unknown"
            )));
        }
        let unknown_id = known.iter().next_back().map_or(1, |c| c + 1);
        Ok(ClassPartition {
            known,
            unknown,
            unknown_id,
        })
    }

    pub fn with_unknown_id(mut self, unknown_id: ClassId) -> Result<Self> {
        if self.known.contains(&unknown_id) {
            return Err(Error::InvalidInput(format!(
                "reserved unknown id {unknown_id} collides with a known class"
            )));
        }
        self.unknown_id = unknown_id;
        Ok(self)
    }

    pub fn known(&self) -> &BTreeSet<ClassId> {
        &self.known
    }

    pub fn unknown(&self) -> &BTreeSet<ClassId> {
        &self.unknown
    }

    pub fn unknown_id(&self) -> ClassId {
        self.unknown_id
    }

    pub fn is_known(&self, class: ClassId) -> bool {
        self.known.contains(&class)
    }

    /// True for the reserved label and for every original unknown class id.
    pub fn is_unknown(&self, class: ClassId) -> bool {
        class == self.unknown_id || self.unknown.contains(&class)
    }

    pub fn kind(&self, class: ClassId) -> Option<ClassKind> {
        if self.is_known(class) {
            Some(ClassKind::Known)
        } else if self.is_unknown(class) {
            Some(ClassKind::Unknown)
        } else {
            None
        }
    }

    /// Maps a label onto the evaluation label space: known ids unchanged,
    /// unknown ids collapsed to the reserved label.
    pub fn collapse(&self, class: ClassId) -> Option<ClassId> {
        match self.kind(class)? {
            ClassKind::Known => Some(class),
            ClassKind::Unknown => Some(self.unknown_id),
        }
    }
}
