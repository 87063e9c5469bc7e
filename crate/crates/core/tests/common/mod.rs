//! Shared test support: seeded instance generators and the metric oracle.
#![allow(dead_code)]

pub mod oracle;
pub mod reference;

macro_rules! ensure_eq {
    ($a:expr, $b:expr, $($fmt:tt)+) => {
        if $a != $b {
            return Err(format!("{}: {:?} != {:?}", format!($($fmt)+), $a, $b));
        }
    };
}

use osodbench::{BoundingBox, ClassId, ClassPartition, Dataset, Detection, GroundTruthObject, ImageId, Taxonomy};
use osodbench::types::ImageRecord;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const KNOWN: [ClassId; 3] = [1, 2, 3];
pub const UNKNOWN: [ClassId; 2] = [10, 11];
pub const UNK: ClassId = 4;

pub fn partition() -> ClassPartition {
    ClassPartition::new(KNOWN, UNKNOWN).unwrap()
}

pub const TAXONOMY_JSON: &str = r#"[{"class_id":1,"class_name":"airplane","superclass_name":"aerial vehicle"},
            {"class_id":10,"class_name":"helicopter","superclass_name":"aerial vehicle"},
            {"class_id":2,"class_name":"car","superclass_name":"vehicle"},
            {"class_id":11,"class_name":"tram","superclass_name":"vehicle"},
            {"class_id":3,"class_name":"sofa","superclass_name":"furniture"}]"#;

pub fn taxonomy() -> Taxonomy {
    Taxonomy::from_json(TAXONOMY_JSON).unwrap()
}

/// A random evaluation problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub dataset: Dataset,
    pub detections: Vec<Detection>,
}

const SCORES: [f64; 11] = [0.01, 0.03, 0.05, 0.1, 0.2, 0.3, 0.45, 0.5, 0.7, 0.8, 0.95];

fn int_box(rng: &mut impl Rng) -> BoundingBox {
    let x = rng.gen_range(0..80) as f64;
    let y = rng.gen_range(0..80) as f64;
    let w = rng.gen_range(4..30) as f64;
    let h = rng.gen_range(4..30) as f64;
    BoundingBox::from_xywh(x, y, w, h).unwrap()
}

fn jitter(rng: &mut impl Rng, b: &BoundingBox) -> BoundingBox {
    let [x, y, w, h] = b.to_xywh();
    let dx = rng.gen_range(-3..=3) as f64;
    let dy = rng.gen_range(-3..=3) as f64;
    let dw = rng.gen_range(-2..=2) as f64;
    BoundingBox::from_xywh((x + dx).max(0.0), (y + dy).max(0.0), (w + dw).max(1.0), h).unwrap()
}

/// At most six objects and six detections per image. Integer boxes and
/// scores from a small discrete set make IoU and score ties common. With
/// `pure_ood` every object is unknown.
pub fn random_instance(seed: u64, pure_ood: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::default();
    let mut dets = Vec::new();
    let num_images = rng.gen_range(1..5);
    let mut gt_id = 1;
    let classes: Vec<ClassId> = if pure_ood {
        UNKNOWN.to_vec()
    } else {
        KNOWN.iter().chain(UNKNOWN.iter()).copied().collect()
    };
    let labels: Vec<ClassId> = KNOWN.iter().copied().chain([UNK]).collect();
    for image_id in 1..=num_images as ImageId {
        ds.images.push(ImageRecord {
            id: image_id,
            width: 120,
            height: 120,
            file_name: None,
        });
        let mut image_gts = Vec::new();
        for _ in 0..rng.gen_range(0..=6) {
            image_gts.push(GroundTruthObject {
                id: gt_id,
                image_id,
                class_id: *classes.choose(&mut rng).unwrap(),
                bbox: int_box(&mut rng),
            });
            gt_id += 1;
        }
        for _ in 0..rng.gen_range(0..=6) {
            let bbox = match image_gts.choose(&mut rng) {
                Some(g) if rng.gen_bool(0.75) => jitter(&mut rng, &g.bbox),
                _ => int_box(&mut rng),
            };
            dets.push(Detection {
                image_id,
                class_id: *labels.choose(&mut rng).unwrap(),
                score: *SCORES.choose(&mut rng).unwrap(),
                bbox,
            });
        }
        ds.ground_truths.extend(image_gts);
    }
    dets.shuffle(&mut rng);
    Instance {
        dataset: ds,
        detections: dets,
    }
}

/// The published OW-DETR++ OpenImagesRoad results as a fixed report.
/// Counts are unknown and left at zero; A-OSE was not reported.
pub fn owdetr_pp_report() -> osodbench::metrics::EvalReport {
    use osodbench::metrics::{EvalOptions, EvalReport, SplitName, SplitReport, ThresholdRow};
    use std::collections::BTreeMap;

    fn split(metrics: &[(&str, f64)], u_recall: Option<f64>) -> SplitReport {
        SplitReport {
            metrics: metrics.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            thresholded: u_recall
                .map(|r| {
                    vec![ThresholdRow {
                        score_threshold: 0.05,
                        u_recall: Some(r),
                        a_ose: None,
                        wi: None,
                    }]
                })
                .unwrap_or_default(),
            notes: vec!["values transcribed from the published OW-DETR++ results".into()],
            ..SplitReport::default()
        }
    }

    let mut splits = BTreeMap::new();
    splits.insert(SplitName::Id, split(&[("mAP_k", 0.219)], None));
    splits.insert(
        SplitName::All,
        split(&[("mAP_k", 0.199), ("AP_u", 0.031), ("AP_all", 0.494)], Some(0.745)),
    );
    splits.insert(
        SplitName::Ood,
        split(&[("AP_u", 0.09), ("AP_all", 0.564), ("AP_sc", 0.379)], Some(0.847)),
    );
    EvalReport {
        config: EvalOptions::default(),
        partition: partition(),
        splits,
    }
}

/// Every metric equals the oracle bit for bit.
pub fn check_instance(seed: u64) -> Result<(), String> {
    let p = partition();
    let inst = random_instance(seed, false);
    let (gts, dets) = (&inst.dataset.ground_truths, &inst.detections);
    for tau in [0.05, 0.3] {
        let cfg = osodbench::metrics::MetricConfig {
            score_threshold: tau,
            ..osodbench::metrics::MetricConfig::default()
        };
        match (osodbench::metrics::map_known(dets, gts, &p, &cfg), oracle::map_known(dets, gts, &p, 0.5)) {
            (Ok(m), Some(o)) => ensure_eq!(m.map.to_bits(), o.to_bits(), "seed {seed}: mAP_k {} vs {o}", m.map),
            (Err(osodbench::Error::UndefinedMetric(_)), None) => {}
            (m, o) => return Err(format!("seed {seed}: mAP_k disagreement {m:?} vs {o:?}")),
        }
        let au = osodbench::metrics::ap_unknown(dets, gts, &p, &cfg).map_err(|e| e.to_string())?.ap;
        ensure_eq!(au.to_bits(), oracle::ap_unknown(dets, gts, &p, 0.5).to_bits(), "seed {seed}: AP_u");
        let aa = osodbench::metrics::ap_all(dets, gts, &cfg).map_err(|e| e.to_string())?.ap;
        ensure_eq!(aa.to_bits(), oracle::ap_all(dets, gts, 0.5).to_bits(), "seed {seed}: AP_all");
        match (osodbench::metrics::u_recall(dets, gts, &p, &cfg), oracle::u_recall(dets, gts, &p, 0.5, tau)) {
            (Ok(a), Some(b)) => ensure_eq!(a.to_bits(), b.to_bits(), "seed {seed}: U-Recall"),
            (Err(osodbench::Error::UndefinedMetric(_)), None) => {}
            (a, b) => return Err(format!("seed {seed}: U-Recall disagreement {a:?} vs {b:?}")),
        }
        ensure_eq!(
            osodbench::metrics::a_ose(dets, gts, &p, &cfg).unwrap(),
            oracle::a_ose(dets, gts, &p, 0.5, tau),
            "seed {seed}: A-OSE"
        );
        match (
            osodbench::metrics::wilderness_impact(dets, gts, &p, &cfg),
            oracle::wilderness_impact(dets, gts, &p, 0.5, tau),
        ) {
            (Ok(a), Some(b)) => ensure_eq!(a.to_bits(), b.to_bits(), "seed {seed}: WI"),
            (Err(osodbench::Error::UndefinedMetric(_)), None) => {}
            (a, b) => return Err(format!("seed {seed}: WI disagreement {a:?} vs {b:?}")),
        }
    }

    let t = taxonomy();
    let ood = random_instance(seed ^ 0x5eed, true);
    let r = osodbench::metrics::ap_superclass(&ood.detections, &ood.dataset.ground_truths, &t, &p, &osodbench::metrics::MetricConfig::default())
        .map_err(|e| e.to_string())?;
    let (ap, tp, fp, fn_) = oracle::ap_superclass(&ood.detections, &ood.dataset.ground_truths, &t, &p, 0.5);
    ensure_eq!(r.ap.to_bits(), ap.to_bits(), "seed {seed}: AP_sc {} vs {ap}", r.ap);
    ensure_eq!((r.counts.tp, r.counts.fp, r.counts.fn_), (tp, fp, fn_), "seed {seed}: AP_sc counts");
    Ok(())
}
