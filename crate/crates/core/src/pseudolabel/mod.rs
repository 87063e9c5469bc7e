//! Unknown-object pseudo-labels from self-supervised ViT tensors.
//!
//! Per image the pipeline runs:
//!
//! 1. DBSCAN over the patch features, then drops the largest cluster as
//!    background ([`dbscan_cluster`], [`foreground_mask`]).
//! 2. Ward agglomerative clustering of the remaining patches, cut at `d_th`
//!    ([`agglomerative_cluster`]).
//! 3. A morphological opening of every cluster mask ([`refine_morphology`]).
//! 4. Per-head attention normalization and averaging, then keeping the
//!    clusters whose mean activation exceeds the image mean
//!    ([`filter_clusters_by_attention`]).
//! 5. Boxes around the `N` largest connected components of each kept cluster
//!    ([`extract_regions`]), NMS across clusters and removal of boxes that
//!    overlap a ground truth by more than `T`.
//!
//! Every stage is a pure function; [`run_pipeline`] returns all
//! intermediate results for inspection.

mod attention;
mod dataset;
mod dbscan;
mod morphology;
mod regions;
mod ward;

use serde::{Deserialize, Serialize};

pub use attention::{average_attention, filter_clusters_by_attention, normalize_attention, AttentionFilter, ClusterStats};
pub use dataset::{
    pseudolabel_dataset, ImageSummary, PseudoAnnotation, PseudoLabelDocument, PseudoLabelReport, SkippedImage,
};
pub use dbscan::{dbscan_cluster, foreground_mask, remove_background};
pub use morphology::refine_morphology;
pub use regions::{connected_components, extract_regions, Connectivity, Region};
pub use ward::{agglomerative_cluster, cut_below, ward_linkage, Merge};

use crate::error::{Error, Result};
use crate::matching::{iou, nms};
use crate::tensor::{AttentionStack, FeatureMap};
use crate::types::BoundingBox;

/// Cluster label grid; `-1` marks noise, background or discarded pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMap {
    height: usize,
    width: usize,
    labels: Vec<i32>,
    cluster_count: usize,
}

impl ClusterMap {
    pub const NOISE: i32 = -1;

    /// Builds a map from raw labels. Ids must be `-1` or non-negative;
    /// the cluster count is one past the largest id.
    pub fn new(height: usize, width: usize, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Data(format!(
                "cluster map {height}x{width} needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l < Self::NOISE) {
            return Err(Error::Data(format!("invalid cluster label {bad}")));
        }
        let cluster_count = labels.iter().max().map_or(0, |&m| (m + 1).max(0) as usize);
        Ok(ClusterMap {
            height,
            width,
            labels,
            cluster_count,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        ClusterMap {
            height,
            width,
            labels: vec![Self::NOISE; height * width],
            cluster_count: 0,
        }
    }

    pub(crate) fn from_parts(height: usize, width: usize, labels: Vec<i32>, cluster_count: usize) -> Self {
        debug_assert!(labels.iter().all(|&l| l >= Self::NOISE && (l as i64) < cluster_count as i64));
        ClusterMap {
            height,
            width,
            labels,
            cluster_count,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major labels.
    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn label(&self, row: usize, col: usize) -> i32 {
        self.labels[row * self.width + col]
    }

    /// Pixel count per cluster id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cluster_count];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    pub fn mask(&self, cluster: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l == cluster as i32).collect()
    }

    /// Renumbers surviving clusters `0..k` keeping their relative order.
    pub fn compacted(&self) -> ClusterMap {
        let sizes = self.sizes();
        let mut remap = vec![Self::NOISE; self.cluster_count];
        let mut next = 0;
        for (id, &n) in sizes.iter().enumerate() {
            if n > 0 {
                remap[id] = next;
                next += 1;
            }
        }
        let labels = self
            .labels
            .iter()
            .map(|&l| if l >= 0 { remap[l as usize] } else { l })
            .collect();
        ClusterMap::from_parts(self.height, self.width, labels, next as usize)
    }

    /// Cluster membership as sets of pixel indices, sorted; ignores ids.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.cluster_count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                groups[l as usize].push(i);
            }
        }
        groups.retain(|g| !g.is_empty());
        groups.sort();
        groups
    }
}

/// Pipeline hyperparameters. Defaults are the published settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    /// DBSCAN neighborhood radius in feature space.
    pub eps: f64,
    /// DBSCAN core-point threshold, counting the point itself.
    pub min_samples: usize,
    /// Ward merge-distance cut.
    pub d_th: f64,
    /// Boxes kept per cluster.
    #[serde(alias = "N")]
    pub max_regions: usize,
    /// Boxes overlapping a ground truth above this IoU are dropped.
    #[serde(alias = "T")]
    pub gt_iou_threshold: f64,
    pub nms_threshold: f64,
    /// Side of the square structuring element; odd.
    pub kernel_size: usize,
    pub iterations: usize,
    pub connectivity: Connectivity,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            eps: 7.0,
            min_samples: 35,
            d_th: 245.0,
            max_regions: 3,
            gt_iou_threshold: 0.3,
            nms_threshold: 0.5,
            kernel_size: 3,
            iterations: 1,
            connectivity: Connectivity::Eight,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return fail(format!("eps must be positive, got {}", self.eps));
        }
        if self.min_samples == 0 {
            return fail("min_samples must be at least 1".into());
        }
        if !(self.d_th.is_finite() && self.d_th > 0.0) {
            return fail(format!("d_th must be positive, got {}", self.d_th));
        }
        if self.max_regions == 0 {
            return fail("max_regions (N) must be at least 1".into());
        }
        if !(self.gt_iou_threshold > 0.0 && self.gt_iou_threshold < 1.0) {
            return fail(format!("gt_iou_threshold (T) must lie in (0, 1), got {}", self.gt_iou_threshold));
        }
        if !(self.nms_threshold > 0.0 && self.nms_threshold <= 1.0) {
            return fail(format!("nms_threshold must lie in (0, 1], got {}", self.nms_threshold));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return fail(format!("kernel_size must be odd, got {}", self.kernel_size));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PipelineParams = serde_json::from_str(text).map_err(|e| Error::parse("pipeline params", e))?;
        p.validate()?;
        Ok(p)
    }
}

/// A generated unknown-object box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub bbox: BoundingBox,
    /// Id in the refined cluster map.
    pub source_cluster: usize,
    /// Mean averaged attention over the source cluster.
    pub mean_activation: f64,
}

/// Every intermediate result of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineTrace {
    pub density: ClusterMap,
    pub foreground: Vec<bool>,
    pub clusters: ClusterMap,
    pub refined: ClusterMap,
    pub attention: Vec<f32>,
    pub filter: AttentionFilter,
    /// Boxes before NMS, in cluster order.
    pub candidates: Vec<PseudoLabel>,
    pub labels: Vec<PseudoLabel>,
}

fn patch_stride(features: &FeatureMap, attention: &AttentionStack) -> Result<u32> {
    match (features.patch_stride, attention.patch_stride) {
        (0, 0) => Err(Error::Data("neither tensor records a patch stride".into())),
        (f, 0) => Ok(f),
        (0, a) => Ok(a),
        (f, a) if f == a => Ok(f),
        (f, a) => Err(Error::Data(format!(
            "feature patch stride {f} differs from attention patch stride {a}"
        ))),
    }
}

/// Runs every stage and keeps the intermediates.
///
/// `ground_truths` are pixel-space boxes of the image's annotated objects.
/// With `image_size` set, boxes are clamped to the image before NMS.
pub fn run_pipeline(
    features: &FeatureMap,
    attention: &AttentionStack,
    ground_truths: &[BoundingBox],
    image_size: Option<(u32, u32)>,
    params: &PipelineParams,
) -> Result<PipelineTrace> {
    params.validate()?;
    if (features.height, features.width) != (attention.height, attention.width) {
        return Err(Error::Data(format!(
            "feature grid {}x{} does not match attention grid {}x{}",
            features.height, features.width, attention.height, attention.width
        )));
    }
    let stride = patch_stride(features, attention)?;
    let (h, w) = (features.height, features.width);

    let a_avg = average_attention(&normalize_attention(attention)?);
    let density = dbscan_cluster(features, params.eps, params.min_samples);
    let foreground = foreground_mask(&density);
    let clusters = agglomerative_cluster(features, &foreground, params.d_th)?;
    let refined = refine_morphology(&clusters, params.kernel_size, params.iterations);
    let filter = filter_clusters_by_attention(&refined, &a_avg)?;

    let mut candidates = Vec::new();
    for &cluster in &filter.kept {
        let stats = &filter.stats[cluster];
        let mask = refined.mask(cluster);
        for bbox in extract_regions(&mask, h, w, params.connectivity, params.max_regions, stride) {
            let bbox = match image_size {
                Some((iw, ih)) => match bbox.clamp_to(f64::from(iw), f64::from(ih)) {
                    Some(b) => b,
                    None => continue,
                },
                None => bbox,
            };
            candidates.push(PseudoLabel {
                bbox,
                source_cluster: cluster,
                mean_activation: stats.mean_activation,
            });
        }
    }

    let boxes: Vec<BoundingBox> = candidates.iter().map(|c| c.bbox).collect();
    let scores: Vec<f64> = candidates.iter().map(|c| c.mean_activation).collect();
    let labels = nms(&boxes, &scores, params.nms_threshold)?
        .into_iter()
        .map(|i| candidates[i].clone())
        .filter(|c| ground_truths.iter().all(|g| iou(&c.bbox, g) <= params.gt_iou_threshold))
        .collect();

    Ok(PipelineTrace {
        density,
        foreground,
        clusters,
        refined,
        attention: a_avg,
        filter,
        candidates,
        labels,
    })
}

/// Pseudo-labels for one image; see [`run_pipeline`].
pub fn generate_pseudo_labels(
    features: &FeatureMap,
    attention: &AttentionStack,
    ground_truths: &[BoundingBox],
    image_size: Option<(u32, u32)>,
    params: &PipelineParams,
) -> Result<Vec<PseudoLabel>> {
    Ok(run_pipeline(features, attention, ground_truths, image_size, params)?.labels)
}
