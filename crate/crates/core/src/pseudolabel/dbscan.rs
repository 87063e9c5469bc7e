//! Exact DBSCAN over patch features and background removal.

use std::collections::VecDeque;

use log::warn;

use super::ClusterMap;
use crate::tensor::FeatureMap;

pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Clusters the `H*W` feature vectors with DBSCAN.
///
/// A point is core when at least `min_samples` points (itself included) lie
/// within Euclidean distance `eps`. Cells are scanned row-major; each
/// unlabeled core cell seeds the next cluster id, which then grows
/// breadth-first. A border cell joins the first cluster that reaches it,
/// which gives the same partition as scikit-learn.
pub fn dbscan_cluster(features: &FeatureMap, eps: f64, min_samples: usize) -> ClusterMap {
    let n = features.num_cells();
    let within = |i: usize, j: usize| squared_distance(features.vector(i), features.vector(j)).sqrt() <= eps;
    let neighbors = |i: usize| (0..n).filter(move |&j| within(i, j));

    let core: Vec<bool> = (0..n).map(|i| neighbors(i).count() >= min_samples).collect();
    let mut labels = vec![ClusterMap::NOISE; n];
    let mut next = 0i32;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if labels[seed] != ClusterMap::NOISE || !core[seed] {
            continue;
        }
        labels[seed] = next;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for q in neighbors(p) {
                if labels[q] == ClusterMap::NOISE {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    ClusterMap::from_parts(features.height, features.width, labels, next as usize)
}

fn largest_cluster(map: &ClusterMap) -> Option<usize> {
    let sizes = map.sizes();
    // max_by_key keeps the last maximum, so scan in reverse for the lowest id
    (0..sizes.len()).rev().max_by_key(|&id| sizes[id])
}

/// Relabels the largest cluster as `-1` and compacts the rest.
/// Size ties remove the lower id. With no clusters the map is returned
/// unchanged.
pub fn remove_background(map: &ClusterMap) -> ClusterMap {
    let Some(bg) = largest_cluster(map) else {
        warn!("density clustering found no clusters; foreground is empty");
        return map.clone();
    };
    let labels = map
        .labels()
        .iter()
        .map(|&l| if l == bg as i32 { ClusterMap::NOISE } else { l })
        .collect();
    ClusterMap::from_parts(map.height(), map.width(), labels, map.cluster_count()).compacted()
}

/// Pixels handed to agglomerative clustering: everything outside the
/// background cluster, DBSCAN noise included. Objects smaller than
/// `min_samples` patches can never form a density cluster, so dropping
/// noise would make them unreachable. Empty when there are no clusters.
pub fn foreground_mask(density: &ClusterMap) -> Vec<bool> {
    match largest_cluster(density) {
        Some(bg) => density.labels().iter().map(|&l| l != bg as i32).collect(),
        None => {
            warn!("density clustering found no clusters; foreground is empty");
            vec![false; density.labels().len()]
        }
    }
}
