//! Disparity estimation for rectified stereo pairs.
//!
//! The default estimator is semi-global matching over 5×5 census
//! descriptors: Hamming matching cost, 8-direction path aggregation,
//! winner-take-all with a uniqueness test, parabola sub-pixel refinement and
//! left-right consistency rejection. Other depth sources (ground truth,
//! precomputed maps) plug in through [`DepthProvider`].

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::image::ImagePlane;
use crate::raster::median3x3;

/// Horizontal disparity (pixels) with an explicit validity mask.
///
/// At the left view a pixel `x` matches `x − d` in the right image; at the
/// right view it matches `x + d` in the left image.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub disparity: ImagePlane,
    pub valid: Vec<bool>,
}

impl DisparityMap {
    pub fn new(disparity: ImagePlane, valid: Vec<bool>) -> Result<Self> {
        if disparity.channels() != 1 || valid.len() != disparity.len_pixels() {
            bail!(Shape, "disparity map needs one channel and a mask of equal size");
        }
        Ok(Self { disparity, valid })
    }

    /// Every pixel valid.
    pub fn dense(disparity: ImagePlane) -> Result<Self> {
        let n = disparity.len_pixels();
        Self::new(disparity, vec![true; n])
    }

    pub fn width(&self) -> usize {
        self.disparity.width()
    }

    pub fn height(&self) -> usize {
        self.disparity.height()
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.valid.is_empty() {
            return 0.0;
        }
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f32> + '_ {
        self.disparity.data().iter().zip(&self.valid).filter(|(_, &ok)| ok).map(|(&d, _)| d)
    }

    pub fn flip_horizontal(&self) -> DisparityMap {
        let w = self.width();
        let mut valid = Vec::with_capacity(self.valid.len());
        for row in self.valid.chunks_exact(w) {
            valid.extend(row.iter().rev());
        }
        DisparityMap { disparity: self.disparity.flip_horizontal(), valid }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Sgm,
    GroundTruth,
    ExternalFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthProviderConfig {
    pub kind: ProviderKind,
    pub d_max: usize,
    pub p1: u16,
    pub p2: u16,
    pub lr_check_threshold: f32,
    /// Relative margin by which the best aggregated cost must beat the best
    /// cost outside its ±1 neighborhood.
    pub uniqueness_ratio: f32,
}

impl Default for DepthProviderConfig {
    fn default() -> Self {
        Self { kind: ProviderKind::Sgm, d_max: 128, p1: 8, p2: 96, lr_check_threshold: 1.0, uniqueness_ratio: 0.05 }
    }
}

impl DepthProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_max < 1 {
            bail!(Config, "d_max must be at least 1");
        }
        if !(0 < self.p1 && self.p1 < self.p2) {
            bail!(Config, "sgm penalties need 0 < P1 < P2 (got {}, {})", self.p1, self.p2);
        }
        if !(self.lr_check_threshold >= 0.0) {
            bail!(Config, "lr_check_threshold must be ≥ 0");
        }
        if !(0.0..1.0).contains(&self.uniqueness_ratio) {
            bail!(Config, "uniqueness_ratio must lie in [0, 1)");
        }
        Ok(())
    }
}

/// 24-bit census descriptor of every pixel over a 5×5 window; bit set where
/// the neighbor is brighter than the center. Borders clamp.
pub fn census_transform(gray: &ImagePlane) -> Vec<u32> {
    let (w, h) = (gray.width(), gray.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let center = gray.get_clamped(x, y, 0);
            let mut bits = 0u32;
            for dy in -2..=2 {
                for dx in -2..=2 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    bits = (bits << 1) | u32::from(gray.get_clamped(x + dx, y + dy, 0) > center);
                }
            }
            out.push(bits);
        }
    }
    out
}

#[inline]
pub fn hamming(a: u32, b: u32) -> u32 {
    (a ^ b).count_ones()
}

/// Raw single-view SGM: disparity and validity before the left-right check.
struct RawDisparity {
    disp: Vec<f32>,
    valid: Vec<bool>,
}

fn sgm_raw(base: &[u32], other: &[u32], w: usize, h: usize, cfg: &DepthProviderConfig) -> RawDisparity {
    let nd = cfg.d_max + 1;
    let mut cost = vec![0u8; w * h * nd];
    for y in 0..h {
        for x in 0..w {
            let c = base[y * w + x];
            let cell = &mut cost[(y * w + x) * nd..(y * w + x + 1) * nd];
            for (d, v) in cell.iter_mut().enumerate() {
                // clamp-to-edge: disparities past the border see the first column
                *v = hamming(c, other[y * w + x.saturating_sub(d)]) as u8;
            }
        }
    }

    let mut total = vec![0u16; w * h * nd];
    let dirs: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];
    for (dx, dy) in dirs {
        aggregate_path(&cost, &mut total, w, h, nd, dx, dy, cfg.p1, cfg.p2);
    }

    let mut disp = vec![0.0f32; w * h];
    let mut valid = vec![false; w * h];
    for i in 0..w * h {
        let s = &total[i * nd..(i + 1) * nd];
        let mut best = 0usize;
        for d in 1..nd {
            if s[d] < s[best] {
                best = d;
            }
        }
        let second = s
            .iter()
            .enumerate()
            .filter(|(d, _)| d.abs_diff(best) > 1)
            .map(|(_, &v)| v)
            .min();
        let unique = match second {
            Some(sec) => (s[best] as f32) < (1.0 - cfg.uniqueness_ratio) * sec as f32,
            None => true,
        };
        let mut d = best as f32;
        if best > 0 && best + 1 < nd {
            let (cm, c0, cp) = (s[best - 1] as f32, s[best] as f32, s[best + 1] as f32);
            let denom = cm - 2.0 * c0 + cp;
            if denom > 0.0 {
                d += (cm - cp) / (2.0 * denom);
            }
        }
        disp[i] = d.clamp(0.0, cfg.d_max as f32);
        valid[i] = unique;
    }
    RawDisparity { disp, valid }
}

#[allow(clippy::too_many_arguments)]
fn aggregate_path(
    cost: &[u8],
    total: &mut [u16],
    w: usize,
    h: usize,
    nd: usize,
    dx: isize,
    dy: isize,
    p1: u16,
    p2: u16,
) {
    // L of the previous row (or of the current row for horizontal paths)
    let mut prev = vec![0u16; w * nd];
    let mut cur = vec![0u16; w * nd];
    let mut prev_min = vec![0u16; w];
    let mut cur_min = vec![0u16; w];
    let mut pred = vec![0u16; nd];
    for row_idx in 0..h {
        let y = if dy >= 0 { row_idx } else { h - 1 - row_idx };
        for col_idx in 0..w {
            let x = if dx >= 0 { col_idx } else { w - 1 - col_idx };
            let px = x as isize - dx;
            let has_pred = px >= 0 && (px as usize) < w && (dy == 0 || row_idx > 0);
            let c = &cost[(y * w + x) * nd..(y * w + x + 1) * nd];
            let mut lmin = u16::MAX;
            if has_pred {
                let px = px as usize;
                let pmin = if dy == 0 {
                    pred.copy_from_slice(&cur[px * nd..(px + 1) * nd]);
                    cur_min[px]
                } else {
                    pred.copy_from_slice(&prev[px * nd..(px + 1) * nd]);
                    prev_min[px]
                };
                let jump = pmin + p2;
                let out = &mut cur[x * nd..(x + 1) * nd];
                for d in 0..nd {
                    let mut m = pred[d].min(jump);
                    if d > 0 {
                        m = m.min(pred[d - 1] + p1);
                    }
                    if d + 1 < nd {
                        m = m.min(pred[d + 1] + p1);
                    }
                    let l = c[d] as u16 + m - pmin;
                    out[d] = l;
                    lmin = lmin.min(l);
                }
            } else {
                for d in 0..nd {
                    let l = c[d] as u16;
                    cur[x * nd + d] = l;
                    lmin = lmin.min(l);
                }
            }
            cur_min[x] = lmin;
            let t = &mut total[(y * w + x) * nd..(y * w + x + 1) * nd];
            for (acc, &l) in t.iter_mut().zip(&cur[x * nd..(x + 1) * nd]) {
                *acc += l;
            }
        }
        if dy != 0 {
            core::mem::swap(&mut prev, &mut cur);
            core::mem::swap(&mut prev_min, &mut cur_min);
        }
    }
}

fn check_pair(left: &ImagePlane, right: &ImagePlane, cfg: &DepthProviderConfig) -> Result<()> {
    cfg.validate()?;
    if !left.same_size(right) {
        bail!(
            Argument,
            "stereo images differ in size ({}x{} vs {}x{})",
            left.width(),
            left.height(),
            right.width(),
            right.height()
        );
    }
    if cfg.d_max >= left.width() {
        bail!(Argument, "d_max {} must be smaller than the image width {}", cfg.d_max, left.width());
    }
    Ok(())
}

/// Rejects pixels whose match in the other view disagrees by more than the
/// threshold. `sign` is −1 for the left view (match at `x − d`), +1 for the
/// right view.
fn lr_check(own: &RawDisparity, other: &RawDisparity, w: usize, sign: f32, thr: f32) -> Vec<bool> {
    own.disp
        .iter()
        .zip(&own.valid)
        .enumerate()
        .map(|(i, (&d, &ok))| {
            if !ok {
                return false;
            }
            let (x, y) = (i % w, i / w);
            let xm = libm::roundf(x as f32 + sign * d);
            if xm < 0.0 || xm >= w as f32 {
                return false;
            }
            let j = y * w + xm as usize;
            other.valid[j] && (other.disp[j] - d).abs() <= thr
        })
        .collect()
}

fn sgm_both(left: &ImagePlane, right: &ImagePlane, cfg: &DepthProviderConfig) -> Result<(DisparityMap, DisparityMap)> {
    check_pair(left, right, cfg)?;
    let (w, h) = (left.width(), left.height());
    let gl = left.luma();
    let gr = right.luma();
    let cl = census_transform(&gl);
    let cr = census_transform(&gr);
    let raw_left = sgm_raw(&cl, &cr, w, h, cfg);
    // the right view is the left view of the mirrored pair
    let fl = census_transform(&gl.flip_horizontal());
    let fr = census_transform(&gr.flip_horizontal());
    let raw_right_flipped = sgm_raw(&fr, &fl, w, h, cfg);
    let raw_right = unflip(&raw_right_flipped, w);

    let thr = cfg.lr_check_threshold;
    let valid_l = lr_check(&raw_left, &raw_right, w, -1.0, thr);
    let valid_r = lr_check(&raw_right, &raw_left, w, 1.0, thr);
    let to_map = |raw: RawDisparity, valid: Vec<bool>| {
        DisparityMap::new(ImagePlane::new(w, h, 1, raw.disp).expect("disparity shape"), valid)
    };
    Ok((to_map(raw_left, valid_l)?, to_map(raw_right, valid_r)?))
}

fn unflip(raw: &RawDisparity, w: usize) -> RawDisparity {
    let mut disp = Vec::with_capacity(raw.disp.len());
    let mut valid = Vec::with_capacity(raw.valid.len());
    for (drow, vrow) in raw.disp.chunks_exact(w).zip(raw.valid.chunks_exact(w)) {
        disp.extend(drow.iter().rev());
        valid.extend(vrow.iter().rev());
    }
    RawDisparity { disp, valid }
}

/// Semi-global matching disparity at the left view, after the left-right
/// consistency check.
pub fn sgm_match(left: &ImagePlane, right: &ImagePlane, config: &DepthProviderConfig) -> Result<DisparityMap> {
    Ok(sgm_both(left, right, config)?.0)
}

/// Disparity maps at both input views of a rectified pair.
pub fn estimate_disparity_pair(
    left: &ImagePlane,
    right: &ImagePlane,
    config: &DepthProviderConfig,
) -> Result<(DisparityMap, DisparityMap)> {
    sgm_both(left, right, config)
}

/// Densifies a disparity map: each invalid pixel takes the smaller of the
/// nearest valid disparities to its left and right in the same row (rows
/// with no valid pixel copy the nearest filled row), then a 3×3 median is
/// applied to the whole map.
pub fn fill_invalid(disp: &DisparityMap) -> Result<DisparityMap> {
    let (w, h) = (disp.width(), disp.height());
    if !disp.valid.iter().any(|&v| v) {
        bail!(Provider, "disparity map has no valid pixel to fill from");
    }
    let src = disp.disparity.data();
    let mut out = vec![0.0f32; w * h];
    let mut row_ok = vec![false; h];
    let mut left_val = vec![None::<f32>; w];
    for y in 0..h {
        let v = &disp.valid[y * w..(y + 1) * w];
        let d = &src[y * w..(y + 1) * w];
        if !v.iter().any(|&b| b) {
            continue;
        }
        row_ok[y] = true;
        let mut last = None;
        for x in 0..w {
            if v[x] {
                last = Some(d[x]);
            }
            left_val[x] = last;
        }
        let mut next = None;
        for x in (0..w).rev() {
            if v[x] {
                next = Some(d[x]);
                out[y * w + x] = d[x];
                continue;
            }
            out[y * w + x] = match (left_val[x], next) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!("row has a valid pixel"),
            };
        }
    }
    for y in 0..h {
        if row_ok[y] {
            continue;
        }
        let nearest = (0..h)
            .filter(|&r| row_ok[r])
            .min_by_key(|&r| (r.abs_diff(y), r))
            .expect("some row is valid");
        let (a, b) = (nearest * w, y * w);
        out.copy_within(a..a + w, b);
    }
    let filled = ImagePlane::new(w, h, 1, out)?;
    DisparityMap::dense(median3x3(&filled))
}

/// Inverse depth `d / (f·b)` in 1/m; invalid pixels become 0.
pub fn disparity_to_inverse_depth(disp: &DisparityMap, focal_px: f64, baseline_m: f64) -> Result<ImagePlane> {
    if !(focal_px > 0.0 && baseline_m > 0.0) {
        bail!(Argument, "focal length and baseline must be positive (f={focal_px}, b={baseline_m})");
    }
    let scale = 1.0 / (focal_px * baseline_m);
    let data = disp
        .disparity
        .data()
        .iter()
        .zip(&disp.valid)
        .map(|(&d, &ok)| if ok { (d as f64 * scale).max(0.0) as f32 } else { 0.0 })
        .collect();
    ImagePlane::new(disp.width(), disp.height(), 1, data)
}

/// Source of inverse depth for both input views of a rectified pair.
pub trait DepthProvider {
    fn inverse_depth_pair(
        &self,
        left: &ImagePlane,
        right: &ImagePlane,
        focal_px: f64,
        baseline_m: f64,
    ) -> Result<(ImagePlane, ImagePlane)>;
}

/// Semi-global matching followed by background-favoring densification.
#[derive(Debug, Clone, Default)]
pub struct SgmProvider {
    pub config: DepthProviderConfig,
}

impl DepthProvider for SgmProvider {
    fn inverse_depth_pair(
        &self,
        left: &ImagePlane,
        right: &ImagePlane,
        focal_px: f64,
        baseline_m: f64,
    ) -> Result<(ImagePlane, ImagePlane)> {
        let (dl, dr) = estimate_disparity_pair(left, right, &self.config)?;
        PrecomputedDisparity { left: dl, right: dr }.inverse_depth_pair(left, right, focal_px, baseline_m)
    }
}

/// Disparity maps produced elsewhere (e.g. loaded from disk).
#[derive(Debug, Clone)]
pub struct PrecomputedDisparity {
    pub left: DisparityMap,
    pub right: DisparityMap,
}

impl DepthProvider for PrecomputedDisparity {
    fn inverse_depth_pair(
        &self,
        left: &ImagePlane,
        _right: &ImagePlane,
        focal_px: f64,
        baseline_m: f64,
    ) -> Result<(ImagePlane, ImagePlane)> {
        for m in [&self.left, &self.right] {
            if m.width() != left.width() || m.height() != left.height() {
                bail!(Shape, "disparity map size does not match the input images");
            }
        }
        let l = disparity_to_inverse_depth(&fill_invalid(&self.left)?, focal_px, baseline_m)?;
        let r = disparity_to_inverse_depth(&fill_invalid(&self.right)?, focal_px, baseline_m)?;
        Ok((l, r))
    }
}

/// Known inverse depth handed through untouched.
#[derive(Debug, Clone)]
pub struct GroundTruthDepth {
    pub left: ImagePlane,
    pub right: ImagePlane,
}

impl DepthProvider for GroundTruthDepth {
    fn inverse_depth_pair(
        &self,
        left: &ImagePlane,
        _right: &ImagePlane,
        _focal_px: f64,
        _baseline_m: f64,
    ) -> Result<(ImagePlane, ImagePlane)> {
        for m in [&self.left, &self.right] {
            if !m.same_size(left) || m.channels() != 1 {
                bail!(Shape, "ground-truth inverse depth does not match the input images");
            }
        }
        if self.left.data().iter().chain(self.right.data()).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(crate::Error::Provider("ground-truth inverse depth must be finite and ≥ 0".to_string()));
        }
        Ok((self.left.clone(), self.right.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u32) -> ImagePlane {
        ImagePlane::from_fn(w, h, |x, y| {
            let mut v = (x as u32).wrapping_mul(73_856_093) ^ (y as u32).wrapping_mul(19_349_663) ^ seed;
            v ^= v >> 13;
            v = v.wrapping_mul(0x5bd1_e995);
            v ^= v >> 15;
            (v & 0xff) as f32 / 255.0
        })
    }

    fn small_cfg() -> DepthProviderConfig {
        DepthProviderConfig { d_max: 16, ..Default::default() }
    }

    #[test]
    fn census_of_constant_patch_is_zero() {
        let g = ImagePlane::filled(5, 5, 1, 0.4);
        assert!(census_transform(&g).iter().all(|&c| c == 0));
        assert_eq!(hamming(0b1011, 0b1011), 0);
        assert_eq!(hamming(0, u32::MAX >> 8), 24);
    }

    #[test]
    fn identical_images_give_zero_disparity() {
        let img = noise(48, 32, 7);
        let (l, r) = estimate_disparity_pair(&img, &img, &small_cfg()).unwrap();
        for m in [&l, &r] {
            assert!(m.valid_fraction() > 0.9);
            assert!(m.valid_values().all(|d| d.abs() < 1e-6));
        }
    }

    #[test]
    fn shifted_noise_recovers_shift() {
        let base = noise(80, 40, 3);
        // right image: scene shifted left by 5 px, so left x matches right x − 5
        let right = ImagePlane::from_fn(80, 40, |x, y| base.get((x + 5).min(79), y));
        let l = sgm_match(&base, &right, &small_cfg()).unwrap();
        let mut vals: Vec<f32> = l.valid_values().collect();
        assert!(vals.len() > 80 * 40 / 2);
        vals.sort_by(f32::total_cmp);
        let median = vals[vals.len() / 2];
        assert!((median - 5.0).abs() <= 0.5, "median {median}");
    }

    #[test]
    fn textureless_pair_is_flagged_invalid() {
        let flat = ImagePlane::filled(40, 20, 1, 0.5);
        let (l, _) = estimate_disparity_pair(&flat, &flat, &small_cfg()).unwrap();
        assert!(l.valid_fraction() < 0.1, "valid fraction {}", l.valid_fraction());
    }

    #[test]
    fn argument_errors() {
        let a = noise(20, 10, 1);
        let b = noise(21, 10, 1);
        assert!(matches!(estimate_disparity_pair(&a, &b, &small_cfg()), Err(crate::Error::Argument(_))));
        let cfg = DepthProviderConfig { d_max: 20, ..Default::default() };
        assert!(matches!(sgm_match(&a, &a, &cfg), Err(crate::Error::Argument(_))));
        let bad = DepthProviderConfig { p1: 100, p2: 10, ..small_cfg() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fill_prefers_background() {
        // one invalid pixel between a 4 and a 12
        let row = ImagePlane::from_fn(3, 1, |x, _| [4.0, 0.0, 12.0][x]);
        let filled = fill_invalid(&DisparityMap::new(row, vec![true, false, true]).unwrap()).unwrap();
        assert_eq!(filled.disparity.get(1, 0), 4.0);

        // the same with a whole invalid seam column between two planes
        let disp = ImagePlane::from_fn(11, 5, |x, _| if x < 5 { 4.0 } else { 12.0 });
        let valid: Vec<bool> = (0..55).map(|i| i % 11 != 5).collect();
        let filled = fill_invalid(&DisparityMap::new(disp, valid).unwrap()).unwrap();
        assert!((0..5).all(|y| filled.disparity.get(5, y) == 4.0));

        // a band of 10 invalid columns between the planes
        let disp = ImagePlane::from_fn(30, 6, |x, _| if x < 10 { 12.0 } else { 4.0 });
        let valid: Vec<bool> = (0..180).map(|i| !(10..20).contains(&(i % 30))).collect();
        let filled = fill_invalid(&DisparityMap::new(disp, valid).unwrap()).unwrap();
        for y in 0..6 {
            for x in 10..20 {
                assert_eq!(filled.disparity.get(x, y), 4.0);
            }
        }
        assert!(filled.valid.iter().all(|&v| v));
    }

    #[test]
    fn fill_requires_a_valid_pixel() {
        let m = DisparityMap::new(ImagePlane::zeros(4, 4, 1), vec![false; 16]).unwrap();
        assert!(matches!(fill_invalid(&m), Err(crate::Error::Provider(_))));
    }

    #[test]
    fn fill_median_only_touches_spikes() {
        let mut d = ImagePlane::filled(6, 6, 1, 3.0);
        d.set(3, 3, 40.0);
        let out = fill_invalid(&DisparityMap::dense(d).unwrap()).unwrap();
        assert!(out.disparity.data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn inverse_depth_conversion() {
        let d = ImagePlane::from_fn(3, 1, |x, _| [50.0, 0.0, 20.0][x]);
        let m = DisparityMap::new(d, vec![true, true, false]).unwrap();
        let inv = disparity_to_inverse_depth(&m, 500.0, 0.1).unwrap();
        assert!((inv.get(0, 0) - 1.0).abs() < 1e-6);
        assert_eq!(inv.get(1, 0), 0.0);
        assert_eq!(inv.get(2, 0), 0.0);
        assert!(disparity_to_inverse_depth(&m, 0.0, 0.1).is_err());
    }
}
