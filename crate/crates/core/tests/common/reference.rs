//! Stage outputs against scikit-learn (DBSCAN, Ward) and OpenCV (opening).
//! Regenerate the fixture with `tests/fixtures/gen_clustering.py`.

use std::collections::BTreeMap;

use osodbench::pseudolabel::{agglomerative_cluster, dbscan_cluster, refine_morphology, ward_linkage, ClusterMap};
use osodbench::tensor::FeatureMap;
use serde::Deserialize;

#[derive(Deserialize)]
struct DbscanCase {
    name: String,
    n: usize,
    dim: usize,
    points: Vec<f32>,
    eps: f64,
    min_samples: usize,
    labels: Vec<i32>,
}

#[derive(Deserialize)]
struct WardCase {
    name: String,
    n: usize,
    dim: usize,
    points: Vec<f32>,
    threshold: f64,
    labels: Vec<i32>,
    merge_distances: Vec<f64>,
}

#[derive(Deserialize)]
struct OpeningCase {
    name: String,
    height: usize,
    width: usize,
    kernel: usize,
    iterations: usize,
    mask: Vec<u8>,
    opened: Vec<u8>,
}

#[derive(Deserialize)]
struct Fixtures {
    dbscan: Vec<DbscanCase>,
    ward: Vec<WardCase>,
    opening: Vec<OpeningCase>,
}

fn fixtures() -> Fixtures {
    serde_json::from_str(include_str!("../fixtures/clustering.json")).expect("clustering fixture")
}

/// Clusters as sorted index sets; noise kept apart so it must match exactly.
fn canonical(labels: &[i32]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    let mut noise = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l < 0 {
            noise.push(i);
        } else {
            groups.entry(l).or_default().push(i);
        }
    }
    let mut g: Vec<Vec<usize>> = groups.into_values().collect();
    g.sort();
    (g, noise)
}

fn as_row(n: usize, dim: usize, points: Vec<f32>) -> FeatureMap {
    FeatureMap::new(1, n, dim, 1, points).unwrap()
}

/// Returns the number of cases checked.
pub fn check_dbscan() -> Result<usize, String> {
    let cases = fixtures().dbscan;
    let n = cases.len();
    for case in cases {
        let f = as_row(case.n, case.dim, case.points);
        let ours = dbscan_cluster(&f, case.eps, case.min_samples);
        if canonical(ours.labels()) != canonical(&case.labels) {
            return Err(format!("dbscan case {} differs", case.name));
        }
    }
    Ok(n)
}

/// Partitions must agree exactly; merge heights to 1e-9 relative.
pub fn check_ward() -> Result<usize, String> {
    let cases = fixtures().ward;
    let n = cases.len();
    for case in cases {
        let f = as_row(case.n, case.dim, case.points);
        let ours = agglomerative_cluster(&f, &vec![true; case.n], case.threshold).map_err(|e| e.to_string())?;
        if canonical(ours.labels()) != canonical(&case.labels) {
            return Err(format!("ward case {} partition differs", case.name));
        }
        let points: Vec<&[f32]> = (0..case.n).map(|i| f.vector(i)).collect();
        let merges = ward_linkage(&points);
        if merges.len() != case.merge_distances.len() {
            return Err(format!("ward case {}: {} merges", case.name, merges.len()));
        }
        for (m, r) in merges.iter().zip(&case.merge_distances) {
            if (m.distance - r).abs() > 1e-9 * r.max(1.0) {
                return Err(format!("ward case {}: height {} vs {r}", case.name, m.distance));
            }
        }
    }
    Ok(n)
}

pub fn check_opening() -> Result<usize, String> {
    let cases = fixtures().opening;
    let n = cases.len();
    for case in cases {
        let labels = case.mask.iter().map(|&m| if m > 0 { 0 } else { -1 }).collect();
        let map = ClusterMap::new(case.height, case.width, labels).unwrap();
        let opened = refine_morphology(&map, case.kernel, case.iterations);
        let ours: Vec<u8> = opened.labels().iter().map(|&l| u8::from(l >= 0)).collect();
        if ours != case.opened {
            return Err(format!("opening case {} differs", case.name));
        }
    }
    Ok(n)
}
