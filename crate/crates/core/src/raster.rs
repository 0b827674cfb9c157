//! Elementary raster operations. Borders are clamp-to-edge unless stated.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::ImagePlane;

/// Gradient magnitude `sqrt(gx² + gy²)` with the unnormalized 3×3 Sobel
/// kernels.
pub fn sobel_magnitude(map: &ImagePlane) -> Result<ImagePlane> {
    if map.channels() != 1 {
        bail!(Shape, "sobel needs a single-channel plane, got {} channels", map.channels());
    }
    let (w, h) = (map.width(), map.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| map.get_clamped(x + dx, y + dy, 0);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            out.push(libm::sqrtf(gx * gx + gy * gy));
        }
    }
    ImagePlane::new(w, h, 1, out)
}

/// Binary dilation with a `(2·radius+1)²` square element, repeated
/// `iterations` times. Any non-zero input sample counts as set.
pub fn dilate(mask: &ImagePlane, radius: usize, iterations: usize) -> Result<ImagePlane> {
    if mask.channels() != 1 {
        bail!(Shape, "dilate needs a single-channel mask");
    }
    let (w, h) = (mask.width(), mask.height());
    let mut cur: Vec<bool> = mask.data().iter().map(|&v| v != 0.0).collect();
    let mut tmp = vec![false; w * h];
    for _ in 0..iterations {
        // separable: horizontal then vertical running max
        for y in 0..h {
            for x in 0..w {
                let lo = x.saturating_sub(radius);
                let hi = (x + radius).min(w - 1);
                tmp[y * w + x] = cur[y * w + lo..=y * w + hi].iter().any(|&b| b);
            }
        }
        for y in 0..h {
            let lo = y.saturating_sub(radius);
            let hi = (y + radius).min(h - 1);
            for x in 0..w {
                cur[y * w + x] = (lo..=hi).any(|yy| tmp[yy * w + x]);
            }
        }
    }
    ImagePlane::new(w, h, 1, cur.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
}

/// 1 where `map > threshold`, else 0.
pub fn threshold(map: &ImagePlane, threshold: f32) -> ImagePlane {
    map.map(|v| if v > threshold { 1.0 } else { 0.0 })
}

/// Square Gaussian weight table sampled at integer offsets from the center.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    size: usize,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    /// Weight at offset `(dx, dy)` from the center, both in `-radius..=radius`.
    #[inline]
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        self.weights[((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Normalized zero-mean 2D Gaussian of odd `size` and standard deviation
/// `sigma` (pixels).
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<GaussianKernel> {
    if size % 2 == 0 {
        bail!(Argument, "gaussian kernel size must be odd, got {size}");
    }
    if !(sigma > 0.0) {
        bail!(Argument, "gaussian sigma must be positive, got {sigma}");
    }
    let r = (size / 2) as isize;
    let mut weights = Vec::with_capacity(size * size);
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            weights.push(libm::exp(-d2 / (2.0 * sigma * sigma)));
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(GaussianKernel { size, weights })
}

/// Bilinear sample of channel `c` at continuous `(x, y)`, clamp-to-edge.
#[inline]
pub fn sample_bilinear(img: &ImagePlane, x: f64, y: f64, c: usize) -> f32 {
    let x = x.clamp(0.0, (img.width() - 1) as f64);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let x0 = libm::floor(x) as usize;
    let y0 = libm::floor(y) as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = (x - x0 as f64) as f32;
    let fy = (y - y0 as f64) as f32;
    let ch = img.channels();
    let d = img.data();
    let at = |xx: usize, yy: usize| d[(yy * img.width() + xx) * ch + c];
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bot * fy
}

/// 3×3 median filter of a single-channel plane, clamp-to-edge.
pub fn median3x3(map: &ImagePlane) -> ImagePlane {
    let (w, h) = (map.width(), map.height());
    let mut out = ImagePlane::zeros(w, h, 1);
    let mut win = [0.0f32; 9];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    win[k] = map.get_clamped(x + dx, y + dy, 0);
                    k += 1;
                }
            }
            win.sort_unstable_by(f32::total_cmp);
            out.set(x as usize, y as usize, win[4]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pixel(w: usize, h: usize, x: usize, y: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, |xx, yy| if xx == x && yy == y { 1.0 } else { 0.0 })
    }

    #[test]
    fn sobel_constant_is_zero() {
        let m = ImagePlane::filled(6, 5, 1, 3.5);
        assert!(sobel_magnitude(&m).unwrap().data().iter().all(|&v| v == 0.0));
        let one = ImagePlane::filled(1, 1, 1, 7.0);
        assert_eq!(sobel_magnitude(&one).unwrap().data(), &[0.0]);
    }

    #[test]
    fn sobel_vertical_step_is_four() {
        // columns 0..4 are 0, 4..8 are 1; hand convolution gives |gx| = 1+2+1
        let m = ImagePlane::from_fn(8, 6, |x, _| if x >= 4 { 1.0 } else { 0.0 });
        let s = sobel_magnitude(&m).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let expect = if x == 3 || x == 4 { 4.0 } else { 0.0 };
                assert_eq!(s.get(x, y), expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn dilate_single_pixel() {
        let m = single_pixel(9, 9, 4, 4);
        let d1 = dilate(&m, 1, 1).unwrap();
        let d2 = dilate(&m, 1, 2).unwrap();
        // oracle: Chebyshev distance ≤ radius·iterations
        for y in 0..9 {
            for x in 0..9 {
                let cheb = (x as isize - 4).abs().max((y as isize - 4).abs());
                assert_eq!(d1.get(x, y), if cheb <= 1 { 1.0 } else { 0.0 });
                assert_eq!(d2.get(x, y), if cheb <= 2 { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(d1.count_nonzero(), 9);
        assert_eq!(d2.count_nonzero(), 25);
        let z = ImagePlane::zeros(5, 5, 1);
        assert_eq!(dilate(&z, 2, 3).unwrap().count_nonzero(), 0);
    }

    #[test]
    fn gaussian_kernel_contract() {
        let k1 = gaussian_kernel(1, 3.0).unwrap();
        assert_eq!(k1.weights(), &[1.0]);
        assert!(gaussian_kernel(4, 1.0).is_err());

        let k = gaussian_kernel(29, 7.0).unwrap();
        let sum: f64 = k.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let center = k.at(0, 0);
        assert!(k.weights().iter().all(|&w| w <= center));
        for dy in -14..=14isize {
            for dx in -14..=14isize {
                // 90° rotation: (dx, dy) -> (-dy, dx)
                assert_eq!(k.at(dx, dy), k.at(-dy, dx));
            }
        }

        let wide = gaussian_kernel(3, 1e6).unwrap();
        assert!(wide.weights().iter().all(|&w| (w - 1.0 / 9.0).abs() < 1e-9));
    }

    #[test]
    fn median_removes_isolated_spike() {
        let mut m = ImagePlane::filled(5, 5, 1, 2.0);
        m.set(2, 2, 50.0);
        assert!(median3x3(&m).data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn bilinear_midpoint() {
        let m = ImagePlane::from_fn(2, 1, |x, _| x as f32);
        assert_eq!(sample_bilinear(&m, 0.5, 0.0, 0), 0.5);
        assert_eq!(sample_bilinear(&m, -3.0, 0.0, 0), 0.0);
    }
}
