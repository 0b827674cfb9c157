//! Edge-aware RGB-D sharpening.
//!
//! Depth edges are found by thresholding the Sobel magnitude of the inverse
//! depth and dilating the result. Every pixel inside that band takes the
//! color and inverse depth of its nearest pixel outside it, which removes the
//! intermediate "flying" depths that smear across discontinuities.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::image::{ImagePlane, RgbdView};
use crate::raster::{dilate, sobel_magnitude, threshold};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SharpenConfig {
    /// Sobel threshold as a fraction of the inverse-depth range.
    pub edge_threshold_rel: f32,
    pub dilate_radius: usize,
    pub dilate_iterations: usize,
}

impl Default for SharpenConfig {
    fn default() -> Self {
        Self { edge_threshold_rel: 0.05, dilate_radius: 1, dilate_iterations: 2 }
    }
}

impl SharpenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.edge_threshold_rel > 0.0 && self.edge_threshold_rel < 1.0) {
            bail!(Config, "edge_threshold_rel must lie in (0, 1), got {}", self.edge_threshold_rel);
        }
        if self.dilate_radius < 1 {
            bail!(Config, "dilate_radius must be at least 1");
        }
        Ok(())
    }
}

/// Binary mask (1 = edge band) of depth discontinuities.
pub fn depth_edge_mask(inv_depth: &ImagePlane, config: &SharpenConfig) -> Result<ImagePlane> {
    let (lo, hi) = inv_depth.min_max().unwrap_or((0.0, 0.0));
    let tau = config.edge_threshold_rel * (hi - lo);
    let edges = threshold(&sobel_magnitude(inv_depth)?, tau);
    dilate(&edges, config.dilate_radius, config.dilate_iterations)
}

/// Index of the nearest non-edge pixel for every pixel (itself when not an
/// edge). Distance is Euclidean; ties go to the smaller row, then column.
///
/// Searches square rings of growing Chebyshev radius `r` and stops once no
/// farther ring can hold a closer (or equally close) candidate.
pub fn nearest_non_edge(edge: &[bool], width: usize, height: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(edge.len());
    let max_r = width.max(height) as isize;
    for i in 0..edge.len() {
        if !edge[i] {
            out.push(i);
            continue;
        }
        let (x0, y0) = ((i % width) as isize, (i / width) as isize);
        let mut best: Option<(isize, isize, isize)> = None; // (d², y, x)
        let consider = |x: isize, y: isize, best: &mut Option<(isize, isize, isize)>| {
            if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
                return;
            }
            if edge[y as usize * width + x as usize] {
                return;
            }
            let d2 = (x - x0) * (x - x0) + (y - y0) * (y - y0);
            let cand = (d2, y, x);
            if best.is_none_or(|b| cand < b) {
                *best = Some(cand);
            }
        };
        for r in 1..=max_r {
            for dx in -r..=r {
                consider(x0 + dx, y0 - r, &mut best);
                consider(x0 + dx, y0 + r, &mut best);
            }
            for dy in -r + 1..r {
                consider(x0 - r, y0 + dy, &mut best);
                consider(x0 + r, y0 + dy, &mut best);
            }
            if let Some((d2, _, _)) = best {
                if d2 < (r + 1) * (r + 1) {
                    break;
                }
            }
        }
        let (_, by, bx) = best.expect("caller guarantees a non-edge pixel exists");
        out.push(by as usize * width + bx as usize);
    }
    out
}

/// Snaps the RGB-D values inside depth-edge bands to their nearest non-edge
/// neighbor. Non-edge pixels are returned unchanged.
pub fn sharpen_rgbd(view: &RgbdView, config: &SharpenConfig) -> Result<RgbdView> {
    config.validate()?;
    let (w, h) = (view.width(), view.height());
    let mask = depth_edge_mask(&view.inv_depth, config)?;
    let edge: Vec<bool> = mask.data().iter().map(|&v| v != 0.0).collect();
    if !edge.iter().any(|&e| e) {
        return Ok(view.clone());
    }
    if edge.iter().all(|&e| e) {
        bail!(Config, "every pixel was classified as a depth edge; raise edge_threshold_rel");
    }
    let src = nearest_non_edge(&edge, w, h);
    let mut color = view.color.clone();
    let mut depth = view.inv_depth.clone();
    for (i, &j) in src.iter().enumerate() {
        if i == j {
            continue;
        }
        let c = &view.color.data()[j * 3..j * 3 + 3];
        color.data_mut()[i * 3..i * 3 + 3].copy_from_slice(c);
        depth.data_mut()[i] = view.inv_depth.data()[j];
    }
    RgbdView::new(color, depth)
}
