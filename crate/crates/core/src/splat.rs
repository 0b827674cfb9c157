//! Softmax forward splatting of RGB-D views into target cameras.
//!
//! Each source pixel is reprojected with its own inverse depth and spread
//! over the four surrounding target pixels with bilinear footprint weights.
//! Contributions landing on the same target pixel are blended with
//! exponential importance weights that grow with inverse depth, so near
//! surfaces dominate far ones.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::{ImagePlane, RgbdView};
use crate::rig::{PinholeCamera, Reprojector, RigModel};

/// Landings closer than this to a pixel center count as exact hits.
const SNAP_EPS: f64 = 1e-6;

/// Importance weights `36·((D − D_min)/(D_max − D_min) + 1/9)`, spanning
/// `[4, 40]`. A constant map gets weight 4 everywhere.
pub fn importance_weight(inv_depth: &ImagePlane) -> ImagePlane {
    let (lo, hi) = inv_depth.min_max().unwrap_or((0.0, 0.0));
    if hi <= lo {
        return inv_depth.map(|_| 4.0);
    }
    let (lo, range) = (lo as f64, (hi - lo) as f64);
    inv_depth.map(|d| (36.0 * ((d as f64 - lo) / range + 1.0 / 9.0)) as f32)
}

/// Running sums of a softmax splat.
#[derive(Debug, Clone)]
pub struct SplatAccumulator {
    width: usize,
    height: usize,
    /// Weighted (R, G, B, D) per pixel.
    numerator: Vec<[f64; 4]>,
    denominator: Vec<f64>,
}

impl SplatAccumulator {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, numerator: vec![[0.0; 4]; width * height], denominator: vec![0.0; width * height] }
    }

    /// Adds `value` at continuous target position `(x, y)` with softmax
    /// factor `weight`, spread over the 4 neighboring pixels.
    #[inline]
    pub fn splat(&mut self, x: f64, y: f64, value: [f64; 4], weight: f64) {
        // far outside the target (and NaN) contributes nothing
        if !(x > -1.0 && y > -1.0 && x < self.width as f64 && y < self.height as f64) {
            return;
        }
        let (x0, fx) = split(x);
        let (y0, fy) = split(y);
        let (w, h) = (self.width as isize, self.height as isize);
        let taps = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        // zero footprint weights add nothing, so interior landings skip the
        // per-tap tests
        if x0 >= 0 && y0 >= 0 && x0 + 1 < w && y0 + 1 < h {
            let i = y0 as usize * self.width + x0 as usize;
            for (j, b) in [i, i + 1, i + self.width, i + self.width + 1].into_iter().zip(taps) {
                self.add(j, value, b * weight);
            }
            return;
        }
        for ((dx, dy), b) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().zip(taps) {
            let (tx, ty) = (x0 + dx, y0 + dy);
            if b <= 0.0 || tx < 0 || ty < 0 || tx >= w || ty >= h {
                continue;
            }
            self.add(ty as usize * self.width + tx as usize, value, b * weight);
        }
    }

    #[inline(always)]
    fn add(&mut self, i: usize, value: [f64; 4], k: f64) {
        let n = &mut self.numerator[i];
        for c in 0..4 {
            n[c] += k * value[c];
        }
        self.denominator[i] += k;
    }

    pub fn finish(self) -> SplatResult {
        let n = self.width * self.height;
        let mut color = Vec::with_capacity(n * 3);
        let mut depth = Vec::with_capacity(n);
        let mut covered = Vec::with_capacity(n);
        for (s, &den) in self.numerator.iter().zip(&self.denominator) {
            if den > 0.0 {
                let inv = 1.0 / den;
                color.extend_from_slice(&[(s[0] * inv) as f32, (s[1] * inv) as f32, (s[2] * inv) as f32]);
                depth.push((s[3] * inv) as f32);
                covered.push(1.0);
            } else {
                color.extend_from_slice(&[0.0; 3]);
                depth.push(0.0);
                covered.push(0.0);
            }
        }
        SplatResult {
            color: ImagePlane::new(self.width, self.height, 3, color).expect("splat color shape"),
            inv_depth: ImagePlane::new(self.width, self.height, 1, depth).expect("splat depth shape"),
            covered: ImagePlane::new(self.width, self.height, 1, covered).expect("splat mask shape"),
        }
    }
}

/// Integer part and fraction of a coordinate in `(-1, len)`, with landings
/// closer than [`SNAP_EPS`] to a pixel center snapped onto it.
#[inline]
fn split(v: f64) -> (isize, f64) {
    let mut i = v as isize;
    if i as f64 > v {
        i -= 1;
    }
    let f = v - i as f64;
    if f < SNAP_EPS {
        (i, 0.0)
    } else if 1.0 - f < SNAP_EPS {
        (i + 1, 0.0)
    } else {
        (i, f)
    }
}

/// Splatted color, inverse depth and coverage at a target view. Holes carry
/// zero color and zero inverse depth.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatResult {
    pub color: ImagePlane,
    pub inv_depth: ImagePlane,
    /// 1 where any footprint weight landed.
    pub covered: ImagePlane,
}

impl SplatResult {
    pub fn hole_count(&self) -> usize {
        self.covered.len_pixels() - self.covered.count_nonzero()
    }
}

/// Forward-splats `view`, seen by `src`, into `dst`.
pub fn softmax_splat(view: &RgbdView, src: &PinholeCamera, dst: &PinholeCamera) -> SplatResult {
    SplatSource::new(view).splat(src, dst)
}

/// A view with its softmax factors computed once, for splatting into
/// several targets.
#[derive(Debug, Clone)]
pub struct SplatSource<'a> {
    view: &'a RgbdView,
    /// `exp(w - w_max)` per pixel.
    factor: Vec<f64>,
}

impl<'a> SplatSource<'a> {
    pub fn new(view: &'a RgbdView) -> Self {
        let weights = importance_weight(&view.inv_depth);
        let w_max = weights.min_max().map_or(4.0, |(_, hi)| hi);
        let factor = weights.data().iter().map(|&w| libm::expf(w - w_max) as f64).collect();
        Self { view, factor }
    }

    pub fn splat(&self, src: &PinholeCamera, dst: &PinholeCamera) -> SplatResult {
        let proj = Reprojector::new(src, dst);
        let mut acc = SplatAccumulator::new(dst.width(), dst.height());
        let w = self.view.width();
        let color = self.view.color.data();
        let depth = self.view.inv_depth.data();
        for (i, (&d, &e)) in depth.iter().zip(&self.factor).enumerate() {
            let d = d as f64;
            let Some(p) = proj.map((i % w) as f64, (i / w) as f64, d) else { continue };
            let c = &color[3 * i..3 * i + 3];
            acc.splat(p.x, p.y, [c[0] as f64, c[1] as f64, c[2] as f64, d], e);
        }
        acc.finish()
    }
}

/// The two splats (one per input view) at a single target eye.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeSplats {
    pub from_left: SplatResult,
    pub from_right: SplatResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplatSet {
    pub eye_left: EyeSplats,
    pub eye_right: EyeSplats,
}

/// Warps each input view to each eye view (four independent splats).
pub fn splat_all(left: &RgbdView, right: &RgbdView, rig: &RigModel) -> SplatSet {
    let (l, r) = (SplatSource::new(left), SplatSource::new(right));
    SplatSet { eye_left: splat_sources_to_eye(&l, &r, rig, &rig.eye_left), eye_right: splat_sources_to_eye(&l, &r, rig, &rig.eye_right) }
}

pub fn splat_to_eye(left: &RgbdView, right: &RgbdView, rig: &RigModel, eye: &PinholeCamera) -> EyeSplats {
    splat_sources_to_eye(&SplatSource::new(left), &SplatSource::new(right), rig, eye)
}

pub fn splat_sources_to_eye(left: &SplatSource<'_>, right: &SplatSource<'_>, rig: &RigModel, eye: &PinholeCamera) -> EyeSplats {
    EyeSplats { from_left: left.splat(&rig.cam_left, eye), from_right: right.splat(&rig.cam_right, eye) }
}
