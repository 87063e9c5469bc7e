//! Open-set object detection evaluation toolkit.
//!
//! The crate is organized around four concerns:
//!
//! * [`types`], [`coco`], [`taxonomy`] and [`tensor`] load annotations,
//!   detector outputs, class hierarchies and exported ViT tensors.
//! * [`matching`] holds the geometric primitives (IoU, greedy matching, NMS).
//! * [`metrics`] implements the metric suite: mAP over known classes,
//!   unknown AP, class-agnostic AP, super-class AP, U-Recall, A-OSE and
//!   Wilderness Impact, plus the [`metrics::evaluate`] driver and its report.
//! * [`splits`] builds benchmark splits and validates training scenarios, and
//!   [`pseudolabel`] generates unknown-object pseudo-labels from clustered
//!   feature maps filtered by attention.
//!
//! Every loader returns immutable values; all computations are pure functions
//! and produce identical results regardless of the rayon pool they run on.

pub mod coco;
pub mod error;
pub mod matching;
pub mod metrics;
pub mod pseudolabel;
pub mod splits;
pub mod taxonomy;
pub mod tensor;
pub mod types;

pub use error::{Error, Result};
pub use taxonomy::Taxonomy;
pub use types::{BoundingBox, ClassId, ClassPartition, Dataset, Detection, GroundTruthObject, ImageId};
