//! Per-cluster morphological opening.

use super::ClusterMap;

/// Erosion with a `(2r+1)` square. Out-of-bounds cells count as set, so
/// regions touching the border are not eaten from outside the grid.
fn erode(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for row in 0..h {
        for col in 0..w {
            let rows = row.saturating_sub(r)..=(row + r).min(h - 1);
            out[row * w + col] = rows.into_iter().all(|y| {
                (col.saturating_sub(r)..=(col + r).min(w - 1)).all(|x| mask[y * w + x])
            });
        }
    }
    out
}

fn dilate(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for row in 0..h {
        for col in 0..w {
            let rows = row.saturating_sub(r)..=(row + r).min(h - 1);
            out[row * w + col] = rows.into_iter().any(|y| {
                (col.saturating_sub(r)..=(col + r).min(w - 1)).any(|x| mask[y * w + x])
            });
        }
    }
    out
}

/// Opens each cluster mask: `iterations` erosions followed by as many
/// dilations with a `kernel x kernel` square. Removed cells become `-1`;
/// clusters that vanish are dropped and the remaining ids compacted.
pub fn refine_morphology(labels: &ClusterMap, kernel: usize, iterations: usize) -> ClusterMap {
    let r = kernel / 2;
    if r == 0 || iterations == 0 {
        return labels.compacted();
    }
    let (h, w) = (labels.height(), labels.width());
    let mut out = vec![ClusterMap::NOISE; labels.labels().len()];
    for id in 0..labels.cluster_count() {
        let mut mask = labels.mask(id);
        for _ in 0..iterations {
            mask = erode(&mask, h, w, r);
        }
        for _ in 0..iterations {
            mask = dilate(&mask, h, w, r);
        }
        // opening never grows a set, so clusters stay disjoint
        for (cell, keep) in mask.into_iter().enumerate() {
            if keep {
                out[cell] = id as i32;
            }
        }
    }
    ClusterMap::from_parts(h, w, out, labels.cluster_count()).compacted()
}
