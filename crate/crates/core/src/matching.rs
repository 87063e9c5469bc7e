//! IoU, score-ordered greedy matching and non-maximum suppression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BoundingBox, Detection, GroundTruthObject};

/// Intersection over union, in `[0, 1]`. Symmetric; zero for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Acceptance rule for an overlap. Inclusive (`>=`) by default; `strict`
/// switches to `>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouCriterion {
    pub threshold: f64,
    #[serde(default)]
    pub strict: bool,
}

impl IouCriterion {
    pub fn inclusive(threshold: f64) -> Self {
        IouCriterion {
            threshold,
            strict: false,
        }
    }

    pub fn strict(threshold: f64) -> Self {
        IouCriterion {
            threshold,
            strict: true,
        }
    }

    pub fn accepts(&self, iou: f64) -> bool {
        if self.strict {
            iou > self.threshold
        } else {
            iou >= self.threshold
        }
    }
}

impl Default for IouCriterion {
    fn default() -> Self {
        IouCriterion::inclusive(0.5)
    }
}

/// Injective assignment between detections and ground truths.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchResult {
    pub detection_to_gt: Vec<Option<usize>>,
    pub gt_to_detection: Vec<Option<usize>>,
}

impl MatchResult {
    pub fn num_matched(&self) -> usize {
        self.detection_to_gt.iter().filter(|m| m.is_some()).count()
    }
}

/// Checks that scores are non-increasing.
pub fn ensure_sorted(detections: &[Detection]) -> Result<()> {
    match detections.windows(2).position(|w| w[0].score < w[1].score) {
        Some(i) => Err(Error::Contract(format!(
            "detections must be sorted by descending score (index {} has {} after {})",
            i + 1,
            detections[i + 1].score,
            detections[i].score
        ))),
        None => Ok(()),
    }
}

/// Greedy matching in detection order.
///
/// Each detection takes the eligible, still-unmatched ground truth with the
/// highest IoU, provided `criterion` accepts that IoU. IoU ties go to the
/// lowest ground-truth index. `detections` must already be sorted by
/// descending score; ties keep their input order.
pub fn greedy_match<F>(
    detections: &[Detection],
    ground_truths: &[GroundTruthObject],
    criterion: IouCriterion,
    eligible: F,
) -> Result<MatchResult>
where
    F: Fn(&Detection, &GroundTruthObject) -> bool,
{
    ensure_sorted(detections)?;
    let mut result = MatchResult {
        detection_to_gt: vec![None; detections.len()],
        gt_to_detection: vec![None; ground_truths.len()],
    };
    for (di, det) in detections.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in ground_truths.iter().enumerate() {
            if result.gt_to_detection[gi].is_some() || !eligible(det, gt) {
                continue;
            }
            let overlap = iou(&det.bbox, &gt.bbox);
            if !criterion.accepts(overlap) {
                continue;
            }
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        if let Some((gi, _)) = best {
            result.detection_to_gt[di] = Some(gi);
            result.gt_to_detection[gi] = Some(di);
        }
    }
    Ok(result)
}

/// Stable descending-score order of `scores`.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy NMS. Keeps the best remaining box and suppresses every box whose
/// IoU with it exceeds `iou_threshold`. Returns kept indices in descending
/// score order; equal scores keep input order.
pub fn nms(boxes: &[BoundingBox], scores: &[f64], iou_threshold: f64) -> Result<Vec<usize>> {
    if boxes.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "nms got {} boxes but {} scores",
            boxes.len(),
            scores.len()
        )));
    }
    let order = descending_order(scores);
    let mut suppressed = vec![false; boxes.len()];
    let mut kept = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(i);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && iou(&boxes[i], &boxes[j]) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    Ok(kept)
}
