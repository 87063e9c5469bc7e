//! Open-set detection metrics and the evaluation driver.

mod ap;
mod report;
mod suite;

use serde::{Deserialize, Serialize};

pub use ap::{average_precision, pr_curve, rank, Interpolation, PRCurve, PrPoint};
pub use report::{
    evaluate, EvalOptions, EvalReport, MetricName, SplitName, SplitReport, ThresholdRow,
};
pub use suite::{
    a_ose, ap_all, ap_superclass, ap_unknown, map_known, u_recall, wilderness_impact, ApResult,
    MapResult, SuperClassCounts, SuperClassResult,
};

use crate::error::{Error, Result};
use crate::matching::IouCriterion;

pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.05;

/// Thresholds shared by every metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub iou: IouCriterion,
    /// Confidence cut used by U-Recall, A-OSE and WI.
    pub score_threshold: f64,
    pub interpolation: Interpolation,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            iou: IouCriterion::default(),
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            interpolation: Interpolation::AllPoint,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("iou threshold", self.iou.threshold), ("score threshold", self.score_threshold)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidInput(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}
