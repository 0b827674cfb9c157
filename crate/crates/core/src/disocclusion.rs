//! Partial and full disocclusion filling at one target eye.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::image::ImagePlane;
use crate::raster::{gaussian_kernel, GaussianKernel};
use crate::splat::EyeSplats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Splatted inverse depth below this marks a hole.
    pub epsilon: f64,
    /// Neighbors at or below this inverse depth are ignored by the full fill.
    pub valid_floor: f64,
    /// Odd kernel side; also the neighborhood size.
    pub kernel_size: usize,
    pub kernel_sigma: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, valid_floor: 0.01, kernel_size: 29, kernel_sigma: 7.0 }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.valid_floor > 0.0 && self.valid_floor < self.epsilon) {
            bail!(Config, "need 0 < valid_floor < epsilon, got {} and {}", self.valid_floor, self.epsilon);
        }
        if self.kernel_size % 2 == 0 || self.kernel_size == 0 {
            bail!(Config, "kernel size must be odd, got {}", self.kernel_size);
        }
        if !(self.kernel_sigma > 0.0) {
            bail!(Config, "kernel sigma must be positive");
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<GaussianKernel> {
        self.validate()?;
        gaussian_kernel(self.kernel_size, self.kernel_sigma)
    }
}

/// Hole masks for the two splats at one eye, 1 = hole.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionMasks {
    pub left: ImagePlane,
    pub right: ImagePlane,
    /// Holes in both splats.
    pub full: ImagePlane,
}

pub fn occlusion_masks(d_left: &ImagePlane, d_right: &ImagePlane, config: &FilterConfig) -> Result<OcclusionMasks> {
    if !d_left.same_size(d_right) || d_left.channels() != 1 {
        bail!(Shape, "occlusion masks need two equally sized 1-channel depth maps");
    }
    let eps = config.epsilon;
    let hole = |d: f32| if (d as f64) < eps { 1.0 } else { 0.0 };
    let left = d_left.map(hole);
    let right = d_right.map(hole);
    let full_data: Vec<f32> = left.data().iter().zip(right.data()).map(|(a, b)| a * b).collect();
    let full = ImagePlane::new(left.width(), left.height(), 1, full_data)?;
    Ok(OcclusionMasks { left, right, full })
}

/// Swaps in the other view's color wherever a view has a hole.
pub fn fill_partial(c_left: &ImagePlane, c_right: &ImagePlane, masks: &OcclusionMasks) -> Result<(ImagePlane, ImagePlane)> {
    if !c_left.same_size(c_right) || c_left.width() != masks.full.width() || c_left.height() != masks.full.height() {
        bail!(Shape, "partial fill inputs differ in size");
    }
    let blend = |own: &ImagePlane, other: &ImagePlane, mask: &ImagePlane| {
        let mut out = own.clone();
        let ch = own.channels();
        for (i, &m) in mask.data().iter().enumerate() {
            if m != 0.0 {
                out.data_mut()[i * ch..(i + 1) * ch].copy_from_slice(&other.data()[i * ch..(i + 1) * ch]);
            }
        }
        out
    };
    Ok((blend(c_left, c_right, &masks.left), blend(c_right, c_left, &masks.right)))
}

/// Fills masked pixels with a Gaussian-weighted mean of the farther valid
/// neighbors in the window. Everything else is copied.
pub fn fill_full(p: &ImagePlane, depth: &ImagePlane, mask: &ImagePlane, config: &FilterConfig) -> Result<ImagePlane> {
    let kernel = config.kernel()?;
    fill_full_with(p, depth, mask, &kernel, config.valid_floor)
}

pub fn fill_full_with(
    p: &ImagePlane,
    depth: &ImagePlane,
    mask: &ImagePlane,
    kernel: &GaussianKernel,
    valid_floor: f64,
) -> Result<ImagePlane> {
    Ok(fill_full_counted(p, depth, mask, kernel, valid_floor)?.0)
}

/// [`fill_full_with`] that also returns how many masked pixels found no
/// contributing neighbor and kept their input color.
pub fn fill_full_counted(
    p: &ImagePlane,
    depth: &ImagePlane,
    mask: &ImagePlane,
    kernel: &GaussianKernel,
    valid_floor: f64,
) -> Result<(ImagePlane, usize)> {
    let (w, h) = (p.width(), p.height());
    if depth.width() != w || depth.height() != h || mask.width() != w || mask.height() != h || depth.channels() != 1 {
        bail!(Shape, "full fill inputs differ in size");
    }
    let ch = p.channels();
    let r = kernel.radius();
    let size = kernel.size();
    let floor = valid_floor as f32;
    let d = depth.data();
    let src = p.data();
    let mut out = p.clone();
    let mut unfilled = 0;
    if mask.data().iter().all(|&m| m == 0.0) {
        return Ok((out, 0));
    }
    let (lo_map, hi_map) = window_extrema(d, w, h, r, floor);
    // channel planes padded by the radius on both sides so every window
    // row is a full-width slice; padding carries zero depth and never
    // qualifies
    let pw = w + 2 * r;
    let mut dpad = vec![0.0f32; pw * h];
    let mut planes: [Vec<f32>; 3] = core::array::from_fn(|_| vec![0.0f32; pw * h]);
    for y in 0..h {
        dpad[y * pw + r..y * pw + r + w].copy_from_slice(&d[y * w..(y + 1) * w]);
        for (x, px) in src[y * w * ch..(y + 1) * w * ch].chunks_exact(ch).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                planes[c][y * pw + r + x] = v;
            }
        }
    }
    // kernel rows zero-extended to a whole number of lanes
    let kw = size.div_ceil(LANES) * LANES;
    let mut krows = vec![0.0f32; size * kw];
    for ky in 0..size {
        for kx in 0..size {
            krows[ky * kw + kx] = kernel.weights()[ky * size + kx] as f32;
        }
    }
    let mut dwin = vec![0.0f32; kw];
    let mut cwin: [Vec<f32>; 3] = core::array::from_fn(|_| vec![0.0f32; kw]);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if mask.data()[i] == 0.0 {
                continue;
            }
            let (lo, hi) = (lo_map[i], hi_map[i]);
            // a single depth level (or none) leaves nothing strictly farther
            // than the midpoint
            if !(lo < hi) {
                unfilled += 1;
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let mut acc = [0.0f64; 4];
            for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                let o = yy * pw + x;
                dwin[..size].copy_from_slice(&dpad[o..o + size]);
                for (cw, pl) in cwin.iter_mut().zip(&planes) {
                    cw[..size].copy_from_slice(&pl[o..o + size]);
                }
                let krow = &krows[(yy + r - y) * kw..(yy + r - y + 1) * kw];
                let row = window_row(krow, &dwin, &cwin, floor, mid);
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v as f64;
                }
            }
            let wacc = acc[3];
            if wacc > 0.0 {
                for c in 0..ch {
                    out.data_mut()[i * ch + c] = (acc[c] / wacc) as f32;
                }
            } else {
                unfilled += 1;
            }
        }
    }
    Ok((out, unfilled))
}

const LANES: usize = 8;

/// Kernel-weighted channel sums and weight total over one window row,
/// counting only depths in `(floor, mid)`. Lane-wise partial sums keep the
/// loop vectorizable and the summation order fixed.
#[inline]
fn window_row(krow: &[f32], d: &[f32], c: &[Vec<f32>; 3], floor: f32, mid: f32) -> [f32; 4] {
    let mut acc = [[0.0f32; LANES]; 4];
    let lanes = |s: &[f32], j: usize| -> [f32; LANES] { s[j..j + LANES].try_into().expect("whole lanes") };
    for j in (0..krow.len()).step_by(LANES) {
        let (k, dv) = (lanes(krow, j), lanes(d, j));
        let (r, g, b) = (lanes(&c[0], j), lanes(&c[1], j), lanes(&c[2], j));
        for l in 0..LANES {
            let kk = k[l] * ((dv[l] > floor) & (dv[l] < mid)) as u8 as f32;
            acc[0][l] += kk * r[l];
            acc[1][l] += kk * g[l];
            acc[2][l] += kk * b[l];
            acc[3][l] += kk;
        }
    }
    acc.map(|a| a.iter().sum())
}

// plain comparisons instead of f32::min/max: the inputs hold no NaN and
// this form vectorizes
fn min_into(dst: &mut [f32], src: &[f32]) {
    for (o, &v) in dst.iter_mut().zip(src) {
        *o = if v < *o { v } else { *o };
    }
}

fn max_into(dst: &mut [f32], src: &[f32]) {
    for (o, &v) in dst.iter_mut().zip(src) {
        *o = if v > *o { v } else { *o };
    }
}

/// Min and max of the values above `floor` in the clipped square window of
/// radius `r` around every pixel. Windows without such a value get
/// `(+inf, -inf)`.
fn window_extrema(d: &[f32], w: usize, h: usize, r: usize, floor: f32) -> (Vec<f32>, Vec<f32>) {
    let n = w * h;
    let mut row_lo = alloc::vec![f32::INFINITY; n];
    let mut row_hi = alloc::vec![f32::NEG_INFINITY; n];
    let mut pad_lo = alloc::vec![f32::INFINITY; w + 2 * r];
    let mut pad_hi = alloc::vec![f32::NEG_INFINITY; w + 2 * r];
    for y in 0..h {
        for (x, &v) in d[y * w..(y + 1) * w].iter().enumerate() {
            let valid = v > floor;
            pad_lo[r + x] = if valid { v } else { f32::INFINITY };
            pad_hi[r + x] = if valid { v } else { f32::NEG_INFINITY };
        }
        let (lo, hi) = (&mut row_lo[y * w..(y + 1) * w], &mut row_hi[y * w..(y + 1) * w]);
        for k in 0..=2 * r {
            min_into(lo, &pad_lo[k..k + w]);
            max_into(hi, &pad_hi[k..k + w]);
        }
    }
    let mut lo = alloc::vec![f32::INFINITY; n];
    let mut hi = alloc::vec![f32::NEG_INFINITY; n];
    for y in 0..h {
        let (o_lo, o_hi) = (&mut lo[y * w..(y + 1) * w], &mut hi[y * w..(y + 1) * w]);
        for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
            min_into(o_lo, &row_lo[yy * w..(yy + 1) * w]);
            max_into(o_hi, &row_hi[yy * w..(yy + 1) * w]);
        }
    }
    (lo, hi)
}

/// Filtered colors for one eye plus the full-disocclusion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredEye {
    pub from_left: ImagePlane,
    pub from_right: ImagePlane,
    pub masks: OcclusionMasks,
}

pub fn filter_target_view(splats: &EyeSplats, config: &FilterConfig) -> Result<FilteredEye> {
    let kernel = config.kernel()?;
    let (l, r) = (&splats.from_left, &splats.from_right);
    let masks = occlusion_masks(&l.inv_depth, &r.inv_depth, config)?;
    let (p_l, p_r) = fill_partial(&l.color, &r.color, &masks)?;
    let from_left = fill_full_with(&p_l, &l.inv_depth, &masks.full, &kernel, config.valid_floor)?;
    let from_right = fill_full_with(&p_r, &r.inv_depth, &masks.full, &kernel, config.valid_floor)?;
    Ok(FilteredEye { from_left, from_right, masks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FilterConfig {
        FilterConfig::default()
    }

    #[test]
    fn masks_threshold_and_and() {
        let dl = ImagePlane::new(3, 1, 1, vec![0.05, 0.5, 0.0]).unwrap();
        let dr = ImagePlane::new(3, 1, 1, vec![0.5, 0.0, 0.09]).unwrap();
        let m = occlusion_masks(&dl, &dr, &cfg()).unwrap();
        assert_eq!(m.left.data(), &[1.0, 0.0, 1.0]);
        assert_eq!(m.right.data(), &[0.0, 1.0, 1.0]);
        assert_eq!(m.full.data(), &[0.0, 0.0, 1.0]);
        let none = occlusion_masks(&ImagePlane::filled(2, 2, 1, 0.1), &ImagePlane::filled(2, 2, 1, 3.0), &cfg()).unwrap();
        assert_eq!(none.full.count_nonzero() + none.left.count_nonzero() + none.right.count_nonzero(), 0);
    }

    #[test]
    fn partial_fill_substitutes() {
        let cl = ImagePlane::new(2, 1, 3, vec![0.9, 0.9, 0.9, 0.0, 0.0, 0.0]).unwrap();
        let cr = ImagePlane::new(2, 1, 3, vec![0.1, 0.1, 0.1, 0.2, 0.4, 0.6]).unwrap();
        let dl = ImagePlane::new(2, 1, 1, vec![0.5, 0.0]).unwrap();
        let dr = ImagePlane::new(2, 1, 1, vec![0.5, 0.5]).unwrap();
        let m = occlusion_masks(&dl, &dr, &cfg()).unwrap();
        let (pl, pr) = fill_partial(&cl, &cr, &m).unwrap();
        assert_eq!(pl.rgb(0, 0), [0.9; 3]);
        assert_eq!(pl.rgb(1, 0), [0.2, 0.4, 0.6]);
        assert_eq!(pr, cr);
    }

    #[test]
    fn full_fill_uses_background_only() {
        // 5x5: left two columns background (0.2, red), right two foreground
        // (0.8, green), the middle column is a hole.
        let depth = ImagePlane::from_fn(5, 5, |x, _| match x {
            0 | 1 => 0.2,
            2 => 0.0,
            _ => 0.8,
        });
        let color = ImagePlane::from_rgb_fn(5, 5, |x, y| match x {
            0 | 1 => [0.5 + 0.1 * y as f32, 0.0, 0.0],
            2 => [0.0; 3],
            _ => [0.0, 1.0, 0.0],
        });
        let mask = ImagePlane::from_fn(5, 5, |x, _| (x == 2) as u8 as f32);
        let k = gaussian_kernel(29, 7.0).unwrap();
        let f = fill_full(&color, &depth, &mask, &cfg()).unwrap();
        for y in 0..5isize {
            let mut acc = 0.0f64;
            let mut wsum = 0.0f64;
            for yy in 0..5isize {
                for xx in 0..2isize {
                    let kw = k.at(xx - 2, yy - y);
                    acc += kw * (0.5 + 0.1 * yy as f64);
                    wsum += kw;
                }
            }
            let px = f.rgb(2, y as usize);
            assert!((px[0] as f64 - acc / wsum).abs() < 1e-6);
            assert_eq!(px[1], 0.0);
            assert_eq!(px[2], 0.0);
        }
        for x in [0, 1, 3, 4] {
            for y in 0..5 {
                assert_eq!(f.rgb(x, y), color.rgb(x, y));
            }
        }
    }

    #[test]
    fn full_fill_fallbacks() {
        let p = ImagePlane::new(1, 1, 3, vec![0.3, 0.2, 0.1]).unwrap();
        let d = ImagePlane::zeros(1, 1, 1);
        let m = ImagePlane::filled(1, 1, 1, 1.0);
        assert_eq!(fill_full(&p, &d, &m, &cfg()).unwrap(), p);
        // uniform valid depth: strict midpoint test excludes everything
        let p = ImagePlane::from_rgb_fn(4, 4, |x, _| [x as f32 * 0.1; 3]);
        let d = ImagePlane::filled(4, 4, 1, 0.5);
        let m = ImagePlane::filled(4, 4, 1, 1.0);
        assert_eq!(fill_full(&p, &d, &m, &cfg()).unwrap(), p);
    }

    #[test]
    fn window_extrema_match_brute_force() {
        let (w, h, r) = (23, 17, 4);
        let mut state = 7u32;
        let d: Vec<f32> = (0..w * h)
            .map(|_| {
                state = state.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
                let u = (state >> 8) as f32 / (1u32 << 24) as f32;
                if u < 0.3 { 0.0 } else { u }
            })
            .collect();
        let (lo, hi) = window_extrema(&d, w, h, r, 0.01);
        for y in 0..h {
            for x in 0..w {
                let (mut l, mut u) = (f32::INFINITY, f32::NEG_INFINITY);
                for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                    for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                        let v = d[yy * w + xx];
                        if v > 0.01 {
                            l = l.min(v);
                            u = u.max(v);
                        }
                    }
                }
                assert_eq!((lo[y * w + x], hi[y * w + x]), (l, u), "at {x},{y}");
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(FilterConfig { valid_floor: 0.2, ..cfg() }.validate().is_err());
        assert!(FilterConfig { kernel_size: 28, ..cfg() }.validate().is_err());
    }
}
