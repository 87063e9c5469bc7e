//! Brute-force reference metrics.
//!
//! Deliberately naive: one global pass over detections in stable descending
//! score order, an explicit list of still-unmatched ground truths, its own
//! IoU arithmetic and the sentinel-padded VOC formulation of AP.

use std::collections::BTreeMap;

use osodbench::{ClassId, ClassPartition, Detection, GroundTruthObject, Taxonomy};

pub fn iou_xywh(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a[2] * a[3] + b[2] * b[3] - inter)
}

/// TP flag per detection (in the order given) plus the number of matches.
pub fn brute_match(
    dets: &[&Detection],
    gts: &[&GroundTruthObject],
    thr: f64,
    eligible: &dyn Fn(&Detection, &GroundTruthObject) -> bool,
) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap());
    let mut remaining: Vec<usize> = (0..gts.len()).collect();
    let mut tp = vec![false; dets.len()];
    for i in order {
        let d = dets[i];
        let mut best: Option<(usize, f64)> = None;
        for (slot, &g) in remaining.iter().enumerate() {
            let gt = gts[g];
            if gt.image_id != d.image_id || !eligible(d, gt) {
                continue;
            }
            let v = iou_xywh(d.bbox.to_xywh(), gt.bbox.to_xywh());
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((slot, v));
            }
        }
        if let Some((slot, v)) = best {
            if v >= thr {
                tp[i] = true;
                remaining.remove(slot);
            }
        }
    }
    tp
}

pub fn voc_ap(scores: &[f64], tp: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 || scores.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut mrec = vec![0.0];
    let mut mpre = vec![0.0];
    let (mut ctp, mut cfp) = (0.0, 0.0);
    for &i in &order {
        if tp[i] {
            ctp += 1.0;
        } else {
            cfp += 1.0;
        }
        mrec.push(ctp / num_gt as f64);
        mpre.push(ctp / (ctp + cfp));
    }
    mrec.push(1.0);
    mpre.push(0.0);
    for i in (0..mpre.len() - 1).rev() {
        mpre[i] = mpre[i].max(mpre[i + 1]);
    }
    let mut ap = 0.0;
    for i in 0..mrec.len() - 1 {
        if mrec[i + 1] != mrec[i] {
            ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
        }
    }
    ap
}

fn ap_of(dets: &[&Detection], gts: &[&GroundTruthObject], thr: f64) -> f64 {
    let tp = brute_match(dets, gts, thr, &|_, _| true);
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    voc_ap(&scores, &tp, gts.len())
}

pub fn map_known(dets: &[Detection], gts: &[GroundTruthObject], p: &ClassPartition, thr: f64) -> Option<f64> {
    let mut per_class: BTreeMap<ClassId, f64> = BTreeMap::new();
    for &c in p.known() {
        let g: Vec<&GroundTruthObject> = gts.iter().filter(|g| g.class_id == c).collect();
        if g.is_empty() {
            continue;
        }
        let d: Vec<&Detection> = dets.iter().filter(|d| d.class_id == c).collect();
        per_class.insert(c, ap_of(&d, &g, thr));
    }
    (!per_class.is_empty()).then(|| per_class.values().sum::<f64>() / per_class.len() as f64)
}

pub fn ap_unknown(dets: &[Detection], gts: &[GroundTruthObject], p: &ClassPartition, thr: f64) -> f64 {
    let d: Vec<&Detection> = dets.iter().filter(|d| p.is_unknown(d.class_id)).collect();
    let g: Vec<&GroundTruthObject> = gts.iter().filter(|g| p.is_unknown(g.class_id)).collect();
    ap_of(&d, &g, thr)
}

pub fn ap_all(dets: &[Detection], gts: &[GroundTruthObject], thr: f64) -> f64 {
    let d: Vec<&Detection> = dets.iter().collect();
    let g: Vec<&GroundTruthObject> = gts.iter().collect();
    ap_of(&d, &g, thr)
}

/// `(ap, tp, fp, fn)`.
pub fn ap_superclass(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    t: &Taxonomy,
    p: &ClassPartition,
    thr: f64,
) -> (f64, usize, usize, usize) {
    let d: Vec<&Detection> = dets.iter().collect();
    let g: Vec<&GroundTruthObject> = gts.iter().collect();
    let eligible = |det: &Detection, gt: &GroundTruthObject| {
        p.is_unknown(det.class_id) || t.superclass_of(det.class_id) == t.superclass_of(gt.class_id)
    };
    let tp = brute_match(&d, &g, thr, &eligible);
    let scores: Vec<f64> = d.iter().map(|x| x.score).collect();
    let n_tp = tp.iter().filter(|&&x| x).count();
    (voc_ap(&scores, &tp, g.len()), n_tp, d.len() - n_tp, g.len() - n_tp)
}

pub fn u_recall(dets: &[Detection], gts: &[GroundTruthObject], p: &ClassPartition, thr: f64, tau: f64) -> Option<f64> {
    let g: Vec<&GroundTruthObject> = gts.iter().filter(|g| p.is_unknown(g.class_id)).collect();
    if g.is_empty() {
        return None;
    }
    let d: Vec<&Detection> = dets
        .iter()
        .filter(|d| p.is_unknown(d.class_id) && d.score >= tau)
        .collect();
    let hits = brute_match(&d, &g, thr, &|_, _| true).into_iter().filter(|&x| x).count();
    Some(hits as f64 / g.len() as f64)
}

pub fn a_ose(dets: &[Detection], gts: &[GroundTruthObject], p: &ClassPartition, thr: f64, tau: f64) -> u64 {
    let g: Vec<&GroundTruthObject> = gts.iter().filter(|g| p.is_unknown(g.class_id)).collect();
    let d: Vec<&Detection> = dets.iter().filter(|d| p.is_known(d.class_id) && d.score >= tau).collect();
    brute_match(&d, &g, thr, &|_, _| true).into_iter().filter(|&x| x).count() as u64
}

pub fn wilderness_impact(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    p: &ClassPartition,
    thr: f64,
    tau: f64,
) -> Option<f64> {
    let known = dets.iter().filter(|d| p.is_known(d.class_id) && d.score >= tau).count();
    (known > 0).then(|| a_ose(dets, gts, p, thr, tau) as f64 / known as f64)
}

/// Recall gained at each true positive, weighted by the best precision at
/// that rank or any later rank.
pub fn enumerated_ap(pattern: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut tp = 0;
    let precision: Vec<f64> = pattern
        .iter()
        .enumerate()
        .map(|(k, &hit)| {
            tp += usize::from(hit);
            tp as f64 / (k + 1) as f64
        })
        .collect();
    pattern
        .iter()
        .enumerate()
        .filter(|(_, &hit)| hit)
        .map(|(k, _)| precision[k..].iter().cloned().fold(0.0, f64::max) / num_gt as f64)
        .sum()
}
