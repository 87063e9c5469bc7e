//! Connected components and their pixel-space boxes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::types::BoundingBox;

/// Grid adjacency, serialized as `4` or `8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// A connected component in patch coordinates (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub pixels: usize,
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl Region {
    /// Box in image pixels: patch cell `(r, c)` spans
    /// `[c*s, (c+1)*s) x [r*s, (r+1)*s)`.
    pub fn to_pixel_box(&self, stride: u32) -> BoundingBox {
        let s = f64::from(stride);
        BoundingBox::new(
            self.col_min as f64 * s,
            self.row_min as f64 * s,
            (self.col_max + 1) as f64 * s,
            (self.row_max + 1) as f64 * s,
        )
        .expect("a non-empty region with positive stride has positive area")
    }
}

/// Components of `mask` in row-major discovery order.
pub fn connected_components(mask: &[bool], height: usize, width: usize, connectivity: Connectivity) -> Vec<Region> {
    assert_eq!(mask.len(), height * width, "mask size does not match grid");
    let mut seen = vec![false; mask.len()];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut reg = Region {
            pixels: 0,
            row_min: usize::MAX,
            row_max: 0,
            col_min: usize::MAX,
            col_max: 0,
        };
        while let Some(cell) = queue.pop_front() {
            let (r, c) = (cell / width, cell % width);
            reg.pixels += 1;
            reg.row_min = reg.row_min.min(r);
            reg.row_max = reg.row_max.max(r);
            reg.col_min = reg.col_min.min(c);
            reg.col_max = reg.col_max.max(c);
            for &(dr, dc) in connectivity.offsets() {
                let (Some(nr), Some(nc)) = (r.checked_add_signed(dr), c.checked_add_signed(dc)) else {
                    continue;
                };
                if nr < height && nc < width {
                    let n = nr * width + nc;
                    if mask[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        regions.push(reg);
    }
    regions
}

/// Pixel boxes around the `max_regions` largest components, largest first.
/// Equal sizes keep discovery order.
pub fn extract_regions(
    mask: &[bool],
    height: usize,
    width: usize,
    connectivity: Connectivity,
    max_regions: usize,
    patch_stride: u32,
) -> Vec<BoundingBox> {
    let mut regions = connected_components(mask, height, width, connectivity);
    regions.sort_by_key(|r| std::cmp::Reverse(r.pixels));
    regions
        .iter()
        .take(max_regions)
        .map(|r| r.to_pixel_box(patch_stride))
        .collect()
}
