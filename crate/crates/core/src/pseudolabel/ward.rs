//! Ward agglomerative clustering via the nearest-neighbor chain.

use super::dbscan::squared_distance;
use super::ClusterMap;
use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

/// One merge of the dendrogram. `a` and `b` are the lowest original point
/// indices of the merged clusters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Ward distance, on the same scale as Euclidean point distances.
    pub distance: f64,
    pub size: usize,
}

struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.index(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.d[k] = v;
    }
}

/// Full Ward dendrogram of `points`, merges sorted by distance (stable).
///
/// Squared distances are updated with the Lance-Williams recurrence and the
/// reported distance is their square root, the convention of SciPy and
/// scikit-learn. Ties in the chain prefer the previous chain element, then
/// the lowest index.
pub fn ward_linkage(points: &[&[f32]]) -> Vec<Merge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut dist = Condensed {
        n,
        d: Vec::with_capacity(n * (n - 1) / 2),
    };
    for i in 0..n {
        for j in i + 1..n {
            dist.d.push(squared_distance(points[i], points[j]));
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut merges = Vec::with_capacity(n - 1);

    while merges.len() < n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster remains"));
        }
        loop {
            let a = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| dist.get(a, p));
            for k in (0..n).filter(|&k| active[k] && k != a) {
                let dk = dist.get(a, k);
                if dk < best_d {
                    best = Some(k);
                    best_d = dk;
                }
            }
            let b = best.expect("at least two active clusters");
            if Some(b) != prev {
                chain.push(b);
                continue;
            }
            chain.truncate(chain.len() - 2);
            let (keep, gone) = (a.min(b), a.max(b));
            let (na, nb) = (size[a] as f64, size[b] as f64);
            let dab = dist.get(a, b);
            for k in (0..n).filter(|&k| active[k] && k != a && k != b) {
                let nk = size[k] as f64;
                let v = ((na + nk) * dist.get(k, a) + (nb + nk) * dist.get(k, b) - nk * dab) / (na + nb + nk);
                dist.set(k, keep, v.max(0.0));
            }
            active[gone] = false;
            size[keep] += size[gone];
            merges.push(Merge {
                a: keep,
                b: gone,
                distance: dab.max(0.0).sqrt(),
                size: size[keep],
            });
            break;
        }
    }
    merges.sort_by(|x, y| x.distance.total_cmp(&y.distance));
    merges
}

/// Flat labels from applying every merge with distance strictly below
/// `threshold`. Ids follow first appearance in point order.
pub fn cut_below(n: usize, merges: &[Merge], threshold: f64) -> Vec<usize> {
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for m in merges.iter().filter(|m| m.distance < threshold) {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if ids[r] == usize::MAX {
                ids[r] = next;
                next += 1;
            }
            ids[r]
        })
        .collect()
}

/// Ward clustering of the foreground cells, cut at merge distance `d_th`.
/// Cells outside `foreground` are `-1`; cluster ids follow row-major first
/// appearance. An empty foreground gives a map with no clusters.
pub fn agglomerative_cluster(features: &FeatureMap, foreground: &[bool], d_th: f64) -> Result<ClusterMap> {
    let n = features.num_cells();
    if foreground.len() != n {
        return Err(Error::Data(format!(
            "foreground mask has {} cells, feature grid has {n}",
            foreground.len()
        )));
    }
    let cells: Vec<usize> = (0..n).filter(|&i| foreground[i]).collect();
    let points: Vec<&[f32]> = cells.iter().map(|&i| features.vector(i)).collect();
    let flat = cut_below(points.len(), &ward_linkage(&points), d_th);
    let mut labels = vec![ClusterMap::NOISE; n];
    for (&cell, &id) in cells.iter().zip(&flat) {
        labels[cell] = id as i32;
    }
    let count = flat.iter().max().map_or(0, |m| m + 1);
    Ok(ClusterMap::from_parts(features.height, features.width, labels, count))
}
