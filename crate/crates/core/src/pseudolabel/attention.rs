//! Attention normalization, head averaging and the cluster filter.

use serde::{Deserialize, Serialize};

use super::ClusterMap;
use crate::error::{Error, Result};
use crate::tensor::AttentionStack;

/// Divides every head by its own spatial sum (accumulated in `f64`).
pub fn normalize_attention(attention: &AttentionStack) -> Result<AttentionStack> {
    let mut values = Vec::with_capacity(attention.values.len());
    for head in 0..attention.heads {
        let map = attention.map(head);
        let sum: f64 = map.iter().map(|&v| f64::from(v)).sum();
        if sum <= 0.0 {
            return Err(Error::Data(format!("attention head {head} sums to zero")));
        }
        values.extend(map.iter().map(|&v| (f64::from(v) / sum) as f32));
    }
    AttentionStack::new(
        attention.heads,
        attention.height,
        attention.width,
        attention.patch_stride,
        values,
    )
}

/// Element-wise mean across heads.
pub fn average_attention(attention: &AttentionStack) -> Vec<f32> {
    let cells = attention.height * attention.width;
    let heads = attention.heads as f64;
    (0..cells)
        .map(|i| {
            let s: f64 = (0..attention.heads).map(|h| f64::from(attention.map(h)[i])).sum();
            (s / heads) as f32
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster: usize,
    pub pixels: usize,
    /// Mean of the averaged attention over the cluster's cells.
    pub mean_activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionFilter {
    /// Indexed by cluster id.
    pub stats: Vec<ClusterStats>,
    /// Ids whose mean activation strictly exceeds `image_mean`, ascending.
    pub kept: Vec<usize>,
    pub image_mean: f64,
}

/// Keeps clusters with mean activation strictly above the image mean.
///
/// The comparison is done as `cluster_sum * N > image_sum * n_c` in `f64`,
/// so perfectly uniform attention ties exactly and keeps nothing.
pub fn filter_clusters_by_attention(labels: &ClusterMap, a_avg: &[f32]) -> Result<AttentionFilter> {
    if a_avg.len() != labels.labels().len() {
        return Err(Error::Data(format!(
            "attention map has {} cells, cluster map has {}",
            a_avg.len(),
            labels.labels().len()
        )));
    }
    let total: f64 = a_avg.iter().map(|&v| f64::from(v)).sum();
    let n = a_avg.len() as f64;
    let mut sums = vec![0.0f64; labels.cluster_count()];
    let mut counts = vec![0usize; labels.cluster_count()];
    for (&l, &v) in labels.labels().iter().zip(a_avg) {
        if l >= 0 {
            sums[l as usize] += f64::from(v);
            counts[l as usize] += 1;
        }
    }
    let mut stats = Vec::with_capacity(sums.len());
    let mut kept = Vec::new();
    for (id, (&s, &c)) in sums.iter().zip(&counts).enumerate() {
        if c > 0 && s * n > total * c as f64 {
            kept.push(id);
        }
        stats.push(ClusterStats {
            cluster: id,
            pixels: c,
            mean_activation: if c > 0 { s / c as f64 } else { 0.0 },
        });
    }
    Ok(AttentionFilter {
        stats,
        kept,
        image_mean: total / n,
    })
}
