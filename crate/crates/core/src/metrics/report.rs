//! Split-level evaluation and the serialized report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ap::{Interpolation, PRCurve};
use super::suite::{self, SuperClassCounts};
use super::{MetricConfig, DEFAULT_SCORE_THRESHOLD};
use crate::error::{Error, Result};
use crate::matching::IouCriterion;
use crate::splits::SplitSet;
use crate::taxonomy::Taxonomy;
use crate::types::{ClassPartition, Dataset, Detection, GroundTruthObject, ImageId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Id,
    All,
    Ood,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Id, SplitName::All, SplitName::Ood];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Id => "id",
            SplitName::All => "all",
            SplitName::Ood => "ood",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "id" => Ok(SplitName::Id),
            "all" => Ok(SplitName::All),
            "ood" => Ok(SplitName::Ood),
            other => Err(Error::InvalidInput(format!("unknown split {other:?} (expected id, all or ood)"))),
        }
    }

    fn images(self, splits: &SplitSet) -> &BTreeSet<ImageId> {
        match self {
            SplitName::Id => &splits.id_images,
            SplitName::All => &splits.all_images,
            SplitName::Ood => &splits.ood_images,
        }
    }

    /// Metrics reported for this split when none are requested explicitly.
    pub fn default_metrics(self) -> &'static [MetricName] {
        use MetricName::*;
        match self {
            SplitName::Id => &[MapK],
            SplitName::All => &[MapK, ApU, ApAll, URecall, AOse],
            SplitName::Ood => &[ApU, ApAll, ApSc, URecall, AOse],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricName {
    #[serde(rename = "mAP_k")]
    MapK,
    #[serde(rename = "AP_u")]
    ApU,
    #[serde(rename = "AP_all")]
    ApAll,
    #[serde(rename = "AP_sc")]
    ApSc,
    #[serde(rename = "U-Recall")]
    URecall,
    #[serde(rename = "A-OSE")]
    AOse,
    #[serde(rename = "WI")]
    Wi,
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::MapK => "mAP_k",
            MetricName::ApU => "AP_u",
            MetricName::ApAll => "AP_all",
            MetricName::ApSc => "AP_sc",
            MetricName::URecall => "U-Recall",
            MetricName::AOse => "A-OSE",
            MetricName::Wi => "WI",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match key.as_str() {
            "mapk" => MetricName::MapK,
            "apu" | "apunk" => MetricName::ApU,
            "apall" => MetricName::ApAll,
            "apsc" => MetricName::ApSc,
            "urecall" => MetricName::URecall,
            "aose" => MetricName::AOse,
            "wi" => MetricName::Wi,
            _ => return Err(Error::InvalidInput(format!("unknown metric {s:?}"))),
        })
    }

    fn is_thresholded(self) -> bool {
        matches!(self, MetricName::URecall | MetricName::AOse | MetricName::Wi)
    }
}

/// Fully resolved evaluation settings; embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    pub strict_iou: bool,
    pub interpolation: Interpolation,
    /// One U-Recall / A-OSE / WI row per threshold.
    pub score_thresholds: Vec<f64>,
    pub splits: Vec<SplitName>,
    /// Explicit metric selection; `None` uses each split's defaults.
    pub metrics: Option<Vec<MetricName>>,
    pub include_wi: bool,
    pub include_curves: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_threshold: 0.5,
            strict_iou: false,
            interpolation: Interpolation::AllPoint,
            score_thresholds: vec![DEFAULT_SCORE_THRESHOLD],
            splits: SplitName::ALL.to_vec(),
            metrics: None,
            include_wi: false,
            include_curves: true,
        }
    }
}

impl EvalOptions {
    pub fn metric_config(&self, score_threshold: f64) -> MetricConfig {
        MetricConfig {
            iou: IouCriterion {
                threshold: self.iou_threshold,
                strict: self.strict_iou,
            },
            score_threshold,
            interpolation: self.interpolation,
        }
    }

    fn metrics_for(&self, split: SplitName) -> Result<Vec<MetricName>> {
        let mut metrics: Vec<MetricName> = match &self.metrics {
            Some(explicit) => {
                if split != SplitName::Ood && explicit.contains(&MetricName::ApSc) {
                    return Err(Error::Precondition(format!(
                        "AP_sc can only be computed on the pure OOD split, not on split {:?}",
                        split.as_str()
                    )));
                }
                explicit.clone()
            }
            None => split.default_metrics().to_vec(),
        };
        if self.include_wi && !metrics.contains(&MetricName::Wi) && metrics.contains(&MetricName::AOse) {
            metrics.push(MetricName::Wi);
        }
        metrics.sort();
        metrics.dedup();
        Ok(metrics)
    }

    fn validate(&self) -> Result<()> {
        if self.score_thresholds.is_empty() {
            return Err(Error::InvalidInput("at least one score threshold is required".into()));
        }
        if self.splits.is_empty() {
            return Err(Error::InvalidInput("at least one split is required".into()));
        }
        for &t in &self.score_thresholds {
            self.metric_config(t).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub score_threshold: f64,
    #[serde(default, rename = "U-Recall", skip_serializing_if = "Option::is_none")]
    pub u_recall: Option<f64>,
    #[serde(default, rename = "A-OSE", skip_serializing_if = "Option::is_none")]
    pub a_ose: Option<u64>,
    #[serde(default, rename = "WI", skip_serializing_if = "Option::is_none")]
    pub wi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitReport {
    pub images: usize,
    pub ground_truths: usize,
    pub detections: usize,
    /// Threshold-free metrics keyed by name (`mAP_k`, `AP_u`, `AP_all`, `AP_sc`).
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thresholded: Vec<ThresholdRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superclass_counts: Option<SuperClassCounts>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pr_curves: BTreeMap<String, PRCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalOptions,
    pub partition: ClassPartition,
    pub splits: BTreeMap<SplitName, SplitReport>,
}

impl EvalReport {
    /// Pretty JSON with a trailing newline. Field order is fixed, so equal
    /// reports serialize to identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("evaluation report", e))
    }

    /// Flat metric table: `split,metric,score_threshold,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,metric,score_threshold,value\n");
        for (split, r) in &self.splits {
            for (name, v) in &r.metrics {
                let _ = writeln!(out, "{},{},,{}", split.as_str(), name, v);
            }
            for row in &r.thresholded {
                let t = row.score_threshold;
                if let Some(v) = row.u_recall {
                    let _ = writeln!(out, "{},U-Recall,{t},{v}", split.as_str());
                }
                if let Some(v) = row.a_ose {
                    let _ = writeln!(out, "{},A-OSE,{t},{v}", split.as_str());
                }
                if let Some(v) = row.wi {
                    let _ = writeln!(out, "{},WI,{t},{v}", split.as_str());
                }
            }
        }
        out
    }

    /// One SVG per stored curve, keyed by a file-name-safe stem.
    pub fn curve_svgs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (split, r) in &self.splits {
            for (name, curve) in &r.pr_curves {
                let stem = format!("pr_{}_{}", split.as_str(), name.replace(['/', ' '], "_"));
                let title = format!("{} / {}", split.as_str(), name);
                out.push((stem, render_svg(&title, curve)));
            }
        }
        out
    }
}

fn render_svg(title: &str, curve: &PRCurve) -> String {
    const SIZE: f64 = 320.0;
    const PAD: f64 = 40.0;
    let plot = SIZE - 2.0 * PAD;
    let x = |r: f64| PAD + r * plot;
    let y = |p: f64| SIZE - PAD - p * plot;
    let mut points = String::new();
    for p in &curve.points {
        let _ = write!(points, "{:.3},{:.3} ", x(p.recall), y(p.precision));
    }
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">recall</text>"#,
        SIZE / 2.0,
        SIZE - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle" transform="rotate(-90 12 {})">precision</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        points.trim_end()
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn undefined_note(metric: &str, e: Error) -> Result<String> {
    match e {
        Error::UndefinedMetric(msg) => Ok(format!("{metric} not reported: {msg}")),
        other => Err(other),
    }
}

/// Evaluates every requested split.
///
/// Default metric sets: `id` gets mAP_k; `all` gets mAP_k, AP_u, AP_all,
/// U-Recall and A-OSE; `ood` gets AP_u, AP_all, AP_sc, U-Recall and A-OSE.
/// Metrics without a defined value on a split are omitted and explained in
/// the split's notes. Asking for AP_sc on any split other than `ood` is a
/// [`Error::Precondition`].
pub fn evaluate(
    dataset: &Dataset,
    detections: &[Detection],
    taxonomy: Option<&Taxonomy>,
    partition: &ClassPartition,
    splits: &SplitSet,
    options: &EvalOptions,
) -> Result<EvalReport> {
    options.validate()?;
    let mut report = EvalReport {
        config: options.clone(),
        partition: partition.clone(),
        splits: BTreeMap::new(),
    };
    let mut requested = options.splits.clone();
    requested.sort();
    requested.dedup();
    for split in requested {
        let metrics = options.metrics_for(split)?;
        let images = split.images(splits);
        let gts: Vec<GroundTruthObject> = dataset
            .ground_truths
            .iter()
            .filter(|g| images.contains(&g.image_id))
            .cloned()
            .collect();
        let dets: Vec<Detection> = detections
            .iter()
            .filter(|d| images.contains(&d.image_id))
            .cloned()
            .collect();
        let r = evaluate_split(split, &metrics, &gts, &dets, images.len(), taxonomy, partition, options)?;
        report.splits.insert(split, r);
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_split(
    split: SplitName,
    metrics: &[MetricName],
    gts: &[GroundTruthObject],
    dets: &[Detection],
    num_images: usize,
    taxonomy: Option<&Taxonomy>,
    partition: &ClassPartition,
    options: &EvalOptions,
) -> Result<SplitReport> {
    let base = options.metric_config(options.score_thresholds[0]);
    let mut r = SplitReport {
        images: num_images,
        ground_truths: gts.len(),
        detections: dets.len(),
        ..SplitReport::default()
    };

    for &metric in metrics.iter().filter(|m| !m.is_thresholded()) {
        match metric {
            MetricName::MapK => match suite::map_known(dets, gts, partition, &base) {
                Ok(m) => {
                    r.metrics.insert(metric.as_str().into(), m.map);
                    if options.include_curves {
                        for (class, ap) in m.per_class {
                            r.pr_curves.insert(format!("mAP_k/class_{class}"), ap.curve);
                        }
                    }
                }
                Err(e) => r.notes.push(undefined_note(metric.as_str(), e)?),
            },
            MetricName::ApU | MetricName::ApAll => {
                let res = if metric == MetricName::ApU {
                    suite::ap_unknown(dets, gts, partition, &base)?
                } else {
                    suite::ap_all(dets, gts, &base)?
                };
                r.metrics.insert(metric.as_str().into(), res.ap);
                if options.include_curves {
                    r.pr_curves.insert(metric.as_str().into(), res.curve);
                }
            }
            MetricName::ApSc => {
                let explicit = options.metrics.is_some();
                match taxonomy {
                    Some(tax) => {
                        let res = suite::ap_superclass(dets, gts, tax, partition, &base)?;
                        r.metrics.insert(metric.as_str().into(), res.ap);
                        r.superclass_counts = Some(res.counts);
                        if options.include_curves {
                            r.pr_curves.insert(metric.as_str().into(), res.curve);
                        }
                    }
                    None if explicit => {
                        return Err(Error::InvalidInput("AP_sc requested but no taxonomy was supplied".into()))
                    }
                    None => r.notes.push("AP_sc not reported: no taxonomy supplied".into()),
                }
            }
            _ => unreachable!("thresholded metrics handled below"),
        }
    }

    let wants = |m: MetricName| metrics.contains(&m);
    if wants(MetricName::URecall) || wants(MetricName::AOse) || wants(MetricName::Wi) {
        let mut undefined = BTreeSet::new();
        for &tau in &options.score_thresholds {
            let cfg = options.metric_config(tau);
            let mut row = ThresholdRow {
                score_threshold: tau,
                u_recall: None,
                a_ose: None,
                wi: None,
            };
            if wants(MetricName::URecall) {
                match suite::u_recall(dets, gts, partition, &cfg) {
                    Ok(v) => row.u_recall = Some(v),
                    Err(e) => {
                        undefined.insert(undefined_note("U-Recall", e)?);
                    }
                }
            }
            if wants(MetricName::AOse) {
                row.a_ose = Some(suite::a_ose(dets, gts, partition, &cfg)?);
            }
            if wants(MetricName::Wi) {
                match suite::wilderness_impact(dets, gts, partition, &cfg) {
                    Ok(v) => row.wi = Some(v),
                    Err(e) => {
                        undefined.insert(undefined_note(&format!("WI at score threshold {tau}"), e)?);
                    }
                }
            }
            r.thresholded.push(row);
        }
        r.notes.extend(undefined);
        if wants(MetricName::Wi) && split == SplitName::Ood {
            r.notes
                .push("WI on a pure OOD split has no known objects to compare against; interpret with care".into());
        }
    }
    Ok(r)
}
