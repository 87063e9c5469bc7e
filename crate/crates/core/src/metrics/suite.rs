//! Metric definitions over matched detections.
//!
//! Every metric is a choice of (which detections, which ground truths,
//! which pairs may match) fed through the same per-image greedy matcher.
//! Images are matched independently and in parallel; results are gathered
//! in input order and then ranked with a stable sort, so the outcome never
//! depends on scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ap::{pr_curve, PRCurve};
use super::MetricConfig;
use crate::error::{Error, Result};
use crate::matching::{descending_order, greedy_match};
use crate::taxonomy::Taxonomy;
use crate::types::{ClassId, ClassPartition, Detection, GroundTruthObject, ImageId};

pub(crate) struct MatchOutcome {
    /// True-positive flag per selected detection, in input order.
    pub det_tp: Vec<bool>,
    /// Matched flag per selected ground truth, in input order.
    pub gt_matched: Vec<bool>,
}

impl MatchOutcome {
    fn scored(&self, dets: &[&Detection]) -> Vec<(f64, bool)> {
        dets.iter().zip(&self.det_tp).map(|(d, &tp)| (d.score, tp)).collect()
    }

    fn num_tp(&self) -> usize {
        self.det_tp.iter().filter(|&&t| t).count()
    }
}

/// Runs greedy matching image by image.
pub(crate) fn match_per_image<F>(
    dets: &[&Detection],
    gts: &[&GroundTruthObject],
    config: &MetricConfig,
    eligible: F,
) -> Result<MatchOutcome>
where
    F: Fn(&Detection, &GroundTruthObject) -> bool + Sync,
{
    let mut groups: BTreeMap<ImageId, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        groups.entry(d.image_id).or_default().0.push(i);
    }
    for (i, g) in gts.iter().enumerate() {
        groups.entry(g.image_id).or_default().1.push(i);
    }
    let groups: Vec<_> = groups.into_values().collect();

    let per_image = groups
        .par_iter()
        .map(|(det_idx, gt_idx)| {
            let scores: Vec<f64> = det_idx.iter().map(|&i| dets[i].score).collect();
            let order: Vec<usize> = descending_order(&scores).into_iter().map(|k| det_idx[k]).collect();
            let image_dets: Vec<Detection> = order.iter().map(|&i| dets[i].clone()).collect();
            let image_gts: Vec<GroundTruthObject> = gt_idx.iter().map(|&i| gts[i].clone()).collect();
            let m = greedy_match(&image_dets, &image_gts, config.iou, &eligible)?;
            let det_hits: Vec<(usize, bool)> = order
                .iter()
                .zip(&m.detection_to_gt)
                .map(|(&i, hit)| (i, hit.is_some()))
                .collect();
            let gt_hits: Vec<(usize, bool)> = gt_idx
                .iter()
                .zip(&m.gt_to_detection)
                .map(|(&i, hit)| (i, hit.is_some()))
                .collect();
            Ok((det_hits, gt_hits))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = MatchOutcome {
        det_tp: vec![false; dets.len()],
        gt_matched: vec![false; gts.len()],
    };
    for (det_hits, gt_hits) in per_image {
        for (i, hit) in det_hits {
            out.det_tp[i] = hit;
        }
        for (i, hit) in gt_hits {
            out.gt_matched[i] = hit;
        }
    }
    Ok(out)
}

/// AP value together with the curve it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub ap: f64,
    pub curve: PRCurve,
}

impl ApResult {
    fn from_scored(scored: &[(f64, bool)], num_gt: usize, config: &MetricConfig) -> Result<Self> {
        let curve = pr_curve(scored, num_gt)?;
        Ok(ApResult {
            ap: curve.average_precision(config.interpolation),
            curve,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    /// Mean over known classes that have at least one ground truth.
    pub map: f64,
    pub per_class: BTreeMap<ClassId, ApResult>,
}

/// mAP over known classes.
///
/// Each known class is scored on its own detections against its own ground
/// truths. Detections carrying the unknown label take no part; known
/// detections sitting on unknown objects find nothing to match and count as
/// false positives. Classes absent from the ground truth are skipped.
pub fn map_known(
    detections: &[Detection],
    ground_truths: &[GroundTruthObject],
    partition: &ClassPartition,
    config: &MetricConfig,
) -> Result<MapResult> {
    if partition.known().is_empty() {
        return Err(Error::InvalidInput("mAP_k needs a non-empty known class set".into()));
    }
    let mut per_class = BTreeMap::new();
    for &class in partition.known() {
        let gts: Vec<&GroundTruthObject> = ground_truths.iter().filter(|g| g.class_id == class).collect();
        if gts.is_empty() {
            continue;
        }
        let dets: Vec<&Detection> = detections.iter().filter(|d| d.class_id == class).collect();
        let m = match_per_image(&dets, &gts, config, |_, _| true)?;
        per_class.insert(class, ApResult::from_scored(&m.scored(&dets), gts.len(), config)?);
    }
    if per_class.is_empty() {
        return Err(Error::UndefinedMetric(
            "mAP_k: no known class has a ground truth in this split".into(),
        ));
    }
    let sum: f64 = per_class.values().map(|r| r.ap).sum();
    Ok(MapResult {
        map: sum / per_class.len() as f64,
        per_class,
    })
}

/// AP of the unknown class: unknown-labeled detections against unknown
/// ground truths. Unknown objects found but labeled as a known class earn
/// nothing here.
pub fn ap_unknown(
    detections: &[Detection],
    ground_truths: &[GroundTruthObject],
    partition: &ClassPartition,
    config: &MetricConfig,
) -> Result<ApResult> {
    let dets: Vec<&Detection> = detections.iter().filter(|d| partition.is_unknown(d.class_id)).collect();
    let gts: Vec<&GroundTruthObject> = ground_truths
        .iter()
        .filter(|g| partition.is_unknown(g.class_id))
        .collect();
    let m = match_per_image(&dets, &gts, config, |_, _| true)?;
    ApResult::from_scored(&m.scored(&dets), gts.len(), config)
}

/// Class-agnostic AP: every detection against every ground truth.
pub fn ap_all(
    detections: &[Detection],
    ground_truths: &[GroundTruthObject],
    config: &MetricConfig,
) -> Result<ApResult> {
    let dets: Vec<&Detection> = detections.iter().collect();
    let gts: Vec<&GroundTruthObject> = ground_truths.iter().collect();
    let m = match_per_image(&dets, &gts, config, |_, _| true)?;
    ApResult::from_scored(&m.scored(&dets), gts.len(), config)
}

/// Outcome tallies of the super-class AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SuperClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperClassResult {
    pub ap: f64,
    pub curve: PRCurve,
    pub counts: SuperClassCounts,
}

/// Super-class AP on a pure out-of-distribution split.
///
/// All detections are ranked together. A detection is a true positive when
/// it overlaps a remaining unknown ground truth and is either labeled unknown
/// or labeled with a known class of the same super-class. Anything else is a
/// false positive, and a ground truth left unmatched is a false negative.
pub fn ap_superclass(
    detections: &[Detection],
    ground_truths: &[GroundTruthObject],
    taxonomy: &Taxonomy,
    partition: &ClassPartition,
    config: &MetricConfig,
) -> Result<SuperClassResult> {
    if let Some(g) = ground_truths.iter().find(|g| !partition.is_unknown(g.class_id)) {
        return Err(Error::Precondition(format!(
            "AP_sc can only be computed on a pure OOD split, but ground truth {} (image {}) has class {} which is not unknown",
            g.id, g.image_id, g.class_id
        )));
    }
    let mut gt_sc = Vec::with_capacity(ground_truths.len());
    for g in ground_truths {
        gt_sc.push(taxonomy.superclass_of(g.class_id).ok_or_else(|| {
            Error::InvalidInput(format!("taxonomy has no entry for ground-truth class {}", g.class_id))
        })?);
    }
    for d in detections {
        if !partition.is_unknown(d.class_id) && taxonomy.superclass_of(d.class_id).is_none() {
            return Err(Error::InvalidInput(format!(
                "taxonomy has no entry for detected class {}",
                d.class_id
            )));
        }
    }

    let dets: Vec<&Detection> = detections.iter().collect();
    let gts: Vec<&GroundTruthObject> = ground_truths.iter().collect();
    let m = match_per_image(&dets, &gts, config, |d, g| {
        partition.is_unknown(d.class_id) || taxonomy.superclass_of(d.class_id) == taxonomy.superclass_of(g.class_id)
    })?;
    let tp = m.num_tp();
    let counts = SuperClassCounts {
        tp,
        fp: dets.len() - tp,
        fn_: gts.len() - tp,
    };
    let r = ApResult::from_scored(&m.scored(&dets), gts.len(), config)?;
    Ok(SuperClassResult {
        ap: r.ap,
        curve: r.curve,
        counts,
    })
}

/// Fraction of unknown ground truths recovered by unknown-labeled detections
/// scoring at least the configured threshold.
pub fn u_recall(
    detections: &[Detection],
    ground_truths: &[GroundTruthObject],
    partition: &ClassPartition,
    config: &MetricConfig,
) -> Result<f64> {
    let gts: Vec<&GroundTruthObject> = ground_truths
        .iter()
        .filter(|g| partition.is_unknown(g.class_id))
        .collect();
    if gts.is_empty() {
        return Err(Error::UndefinedMetric("U-Recall: split has no unknown ground truth".into()));
    }
    let dets: Vec<&Detection> = detections
        .iter()
        .filter(|d| partition.is_unknown(d.class_id) && d.score >= config.score_threshold)
        .collect();
    let m = match_per_image(&dets, &gts, config, |_, _| true)?;
    Ok(m.num_tp() as f64 / gts.len() as f64)
}

/// Absolute open-set error: unknown ground truths claimed by known-labeled
/// detections scoring at least the configured threshold.
pub fn a_ose(
    detections: &[Detection],
    ground_truths: &[GroundTruthObject],
    partition: &ClassPartition,
    config: &MetricConfig,
) -> Result<u64> {
    let gts: Vec<&GroundTruthObject> = ground_truths
        .iter()
        .filter(|g| partition.is_unknown(g.class_id))
        .collect();
    let dets: Vec<&Detection> = known_above(detections, partition, config).collect();
    let m = match_per_image(&dets, &gts, config, |_, _| true)?;
    Ok(m.num_tp() as u64)
}

fn known_above<'a>(
    detections: &'a [Detection],
    partition: &'a ClassPartition,
    config: &'a MetricConfig,
) -> impl Iterator<Item = &'a Detection> {
    detections
        .iter()
        .filter(move |d| partition.is_known(d.class_id) && d.score >= config.score_threshold)
}

/// Wilderness impact: A-OSE divided by the number of known-labeled
/// detections at or above the score threshold.
pub fn wilderness_impact(
    detections: &[Detection],
    ground_truths: &[GroundTruthObject],
    partition: &ClassPartition,
    config: &MetricConfig,
) -> Result<f64> {
    let known = known_above(detections, partition, config).count();
    if known == 0 {
        return Err(Error::UndefinedMetric(format!(
            "WI: no known-labeled detection scores at least {}",
            config.score_threshold
        )));
    }
    let errors = a_ose(detections, ground_truths, partition, config)?;
    Ok(errors as f64 / known as f64)
}
