//! Precision-recall curves and average precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// AP interpolation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Area under the monotone precision envelope at every recall change.
    #[default]
    AllPoint,
    /// Mean of the envelope sampled at recall 0.0, 0.1, ..., 1.0.
    ElevenPoint,
}

/// One ranked detection on the curve, serialized as `[score, recall, precision]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct PrPoint {
    pub score: f64,
    pub recall: f64,
    pub precision: f64,
}

impl From<[f64; 3]> for PrPoint {
    fn from([score, recall, precision]: [f64; 3]) -> Self {
        PrPoint {
            score,
            recall,
            precision,
        }
    }
}

impl From<PrPoint> for [f64; 3] {
    fn from(p: PrPoint) -> Self {
        [p.score, p.recall, p.precision]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PRCurve {
    pub num_ground_truth: usize,
    pub points: Vec<PrPoint>,
}

/// Stable descending-score ranking of `(score, is_true_positive)` pairs.
pub fn rank(scored: &[(f64, bool)]) -> Result<Vec<(f64, bool)>> {
    if let Some(i) = scored.iter().position(|(s, _)| s.is_nan()) {
        return Err(Error::Contract(format!("score at index {i} is NaN")));
    }
    let mut ranked = scored.to_vec();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(ranked)
}

/// Builds the curve: one point per detection in descending score order with
/// cumulative precision and recall. With zero ground truths recall is 0.
pub fn pr_curve(scored: &[(f64, bool)], num_gt: usize) -> Result<PRCurve> {
    let ranked = rank(scored)?;
    let num_tp = ranked.iter().filter(|(_, tp)| *tp).count();
    if num_tp > num_gt {
        return Err(Error::Contract(format!(
            "{num_tp} true positives exceed {num_gt} ground truths"
        )));
    }
    let mut tp = 0usize;
    let points = ranked
        .iter()
        .enumerate()
        .map(|(k, &(score, is_tp))| {
            tp += usize::from(is_tp);
            PrPoint {
                score,
                recall: if num_gt == 0 { 0.0 } else { tp as f64 / num_gt as f64 },
                precision: tp as f64 / (k + 1) as f64,
            }
        })
        .collect();
    Ok(PRCurve {
        num_ground_truth: num_gt,
        points,
    })
}

impl PRCurve {
    /// Monotone precision envelope: `max` of precision over this and every
    /// later point.
    pub fn precision_envelope(&self) -> Vec<f64> {
        let mut env: Vec<f64> = self.points.iter().map(|p| p.precision).collect();
        for k in (0..env.len().saturating_sub(1)).rev() {
            if env[k + 1] > env[k] {
                env[k] = env[k + 1];
            }
        }
        env
    }

    pub fn average_precision(&self, interpolation: Interpolation) -> f64 {
        if self.num_ground_truth == 0 || self.points.is_empty() {
            return 0.0;
        }
        let env = self.precision_envelope();
        match interpolation {
            Interpolation::AllPoint => {
                let mut ap = 0.0;
                let mut prev_recall = 0.0;
                for (p, e) in self.points.iter().zip(&env) {
                    ap += (p.recall - prev_recall) * e;
                    prev_recall = p.recall;
                }
                ap
            }
            Interpolation::ElevenPoint => {
                let mut sum = 0.0;
                for t in 0..=10 {
                    let level = t as f64 / 10.0;
                    let p = self
                        .points
                        .iter()
                        .zip(&env)
                        .find(|(p, _)| p.recall >= level)
                        .map_or(0.0, |(_, &e)| e);
                    sum += p;
                }
                sum / 11.0
            }
        }
    }
}

/// All-point interpolated AP of `(score, is_true_positive)` pairs against
/// `num_gt` ground truths. Zero when there is nothing to recall.
pub fn average_precision(scored: &[(f64, bool)], num_gt: usize) -> Result<f64> {
    Ok(pr_curve(scored, num_gt)?.average_precision(Interpolation::AllPoint))
}
