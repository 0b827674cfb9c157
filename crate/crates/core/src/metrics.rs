//! Image quality metrics: PSNR, SSIM and the masked reconstruction loss.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::image::ImagePlane;

/// Returned for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim_mean: f64,
    pub masked_loss: f64,
    pub pixels_total: usize,
    pub pixels_masked: usize,
}

fn check(a: &ImagePlane, b: &ImagePlane) -> Result<()> {
    if !a.same_size(b) || a.channels() != b.channels() {
        bail!(
            Metric,
            "image sizes differ: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        );
    }
    Ok(())
}

pub fn mse(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    check(a, b)?;
    let n = a.data().len().max(1) as f64;
    Ok(a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64) * (x as f64 - y as f64)).sum::<f64>() / n)
}

/// Peak signal-to-noise ratio for unit-range images.
pub fn psnr(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    let m = mse(a, b)?;
    if m <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * libm::log10(1.0 / m)).min(PSNR_CAP_DB))
}

fn gaussian_1d() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamped borders.
fn blur(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (i, kv) in k.iter().enumerate() {
            let yy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
            let src_row = &tmp[yy * w..(yy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for x in 0..w {
                dst[x] += kv * src_row[x];
            }
        }
    }
    out
}

/// Per-pixel SSIM averaged over channels, same size as the inputs.
pub fn ssim_map(a: &ImagePlane, b: &ImagePlane) -> Result<ImagePlane> {
    check(a, b)?;
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let k = gaussian_1d();
    let mut total = vec![0.0f64; w * h];
    for c in 0..ch {
        let xa: Vec<f64> = a.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        let xb: Vec<f64> = b.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        let aa: Vec<f64> = xa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = xb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| p * q).collect();
        let (mu_a, mu_b) = (blur(&xa, w, h, &k), blur(&xb, w, h, &k));
        let (e_aa, e_bb, e_ab) = (blur(&aa, w, h, &k), blur(&bb, w, h, &k), blur(&ab, w, h, &k));
        for i in 0..w * h {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let s = ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            total[i] += s;
        }
    }
    let data = total.iter().map(|&s| (s / ch as f64) as f32).collect();
    ImagePlane::new(w, h, 1, data)
}

pub fn ssim_mean(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    let m = ssim_map(a, b)?;
    Ok(m.data().iter().map(|&v| v as f64).sum::<f64>() / m.len_pixels().max(1) as f64)
}

fn zero_masked(img: &ImagePlane, mask: &ImagePlane) -> ImagePlane {
    let mut out = img.clone();
    let ch = img.channels();
    for (i, &m) in mask.data().iter().enumerate() {
        if m != 0.0 {
            out.data_mut()[i * ch..(i + 1) * ch].fill(0.0);
        }
    }
    out
}

/// `10·mean|Ô−G| − mean SSIM`, both over pixels where `mask` is 0.
///
/// Masked pixels are zeroed in both images before SSIM so nothing inside the
/// mask can leak into the statistics of nearby windows.
pub fn masked_loss(output: &ImagePlane, truth: &ImagePlane, mask: &ImagePlane) -> Result<f64> {
    check(output, truth)?;
    let keep = check_mask(output, mask)?;
    let ch = output.channels();
    let (o, g) = (zero_masked(output, mask), zero_masked(truth, mask));
    let ssim = ssim_map(&o, &g)?;
    let mut l1 = 0.0f64;
    let mut s = 0.0f64;
    for (i, &m) in mask.data().iter().enumerate() {
        if m != 0.0 {
            continue;
        }
        for c in 0..ch {
            l1 += (o.data()[i * ch + c] as f64 - g.data()[i * ch + c] as f64).abs();
        }
        s += ssim.data()[i] as f64;
    }
    Ok(10.0 * l1 / (keep * ch) as f64 - s / keep as f64)
}

fn check_mask(img: &ImagePlane, mask: &ImagePlane) -> Result<usize> {
    if mask.width() != img.width() || mask.height() != img.height() || mask.channels() != 1 {
        bail!(Metric, "mask size does not match the images");
    }
    let keep = mask.len_pixels() - mask.count_nonzero();
    if keep == 0 {
        bail!(Metric, "every pixel is masked");
    }
    Ok(keep)
}

/// PSNR over the pixels where `mask` is 0.
pub fn psnr_masked(a: &ImagePlane, b: &ImagePlane, mask: &ImagePlane) -> Result<f64> {
    check(a, b)?;
    let keep = check_mask(a, mask)?;
    let ch = a.channels();
    let mut se = 0.0f64;
    for (i, &m) in mask.data().iter().enumerate() {
        if m == 0.0 {
            for c in 0..ch {
                let d = a.data()[i * ch + c] as f64 - b.data()[i * ch + c] as f64;
                se += d * d;
            }
        }
    }
    let m = se / (keep * ch) as f64;
    if m <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * libm::log10(1.0 / m)).min(PSNR_CAP_DB))
}

/// Mean SSIM over the pixels where `mask` is 0, with masked pixels zeroed in
/// both images as in [`masked_loss`].
pub fn ssim_masked(a: &ImagePlane, b: &ImagePlane, mask: &ImagePlane) -> Result<f64> {
    check(a, b)?;
    let keep = check_mask(a, mask)?;
    let map = ssim_map(&zero_masked(a, mask), &zero_masked(b, mask))?;
    let s: f64 = map.data().iter().zip(mask.data()).filter(|(_, &m)| m == 0.0).map(|(&v, _)| v as f64).sum();
    Ok(s / keep as f64)
}

pub fn evaluate(output: &ImagePlane, truth: &ImagePlane, mask: &ImagePlane) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr_db: psnr(output, truth)?,
        ssim_mean: ssim_mean(output, truth)?,
        masked_loss: masked_loss(output, truth, mask)?,
        pixels_total: mask.len_pixels(),
        pixels_masked: mask.count_nonzero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u32) -> ImagePlane {
        ImagePlane::from_rgb_fn(w, h, |x, y| {
            let v = |c: u32| {
                let mut s = (x as u32).wrapping_mul(73856093) ^ (y as u32).wrapping_mul(19349663) ^ seed ^ c.wrapping_mul(83492791);
                s ^= s >> 13;
                s = s.wrapping_mul(0x5bd1e995);
                s ^= s >> 15;
                (s % 1000) as f32 / 999.0
            };
            [v(0), v(1), v(2)]
        })
    }

    #[test]
    fn psnr_examples() {
        let a = noise(16, 16, 1);
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);
        let z = ImagePlane::filled(8, 8, 3, 0.4);
        let o = ImagePlane::filled(8, 8, 3, 0.5);
        assert!((psnr(&z, &o).unwrap() - 20.0).abs() < 1e-4);
        let zero = ImagePlane::zeros(4, 4, 3);
        let one = ImagePlane::filled(4, 4, 3, 1.0);
        assert_eq!(psnr(&zero, &one).unwrap(), 0.0);
        assert!(psnr(&zero, &ImagePlane::zeros(4, 5, 3)).is_err());
    }

    #[test]
    fn ssim_identity_and_anticorrelation() {
        let a = noise(24, 20, 7);
        let m = ssim_map(&a, &a).unwrap();
        assert!(m.data().iter().all(|&v| (v - 1.0).abs() < 1e-6));
        let bin = ImagePlane::from_rgb_fn(24, 24, |x, y| [((x / 2 + y / 3) % 2) as f32; 3]);
        let inv = bin.map(|v| 1.0 - v);
        assert!(ssim_mean(&bin, &inv).unwrap() < 0.0);
    }

    #[test]
    fn ssim_constant_offset_closed_form() {
        let a = ImagePlane::filled(16, 16, 3, 0.3);
        let b = ImagePlane::filled(16, 16, 3, 0.4);
        let expect = (2.0 * 0.3 * 0.4 + C1) / (0.09 + 0.16 + C1);
        let got = ssim_mean(&a, &b).unwrap();
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
        assert!(got < 1.0);
    }

    #[test]
    fn masked_loss_examples() {
        let g = noise(20, 20, 3);
        let none = ImagePlane::zeros(20, 20, 1);
        assert!((masked_loss(&g, &g, &none).unwrap() + 1.0).abs() < 1e-6);
        assert!(masked_loss(&g, &g, &ImagePlane::filled(20, 20, 1, 1.0)).is_err());
        let mask = ImagePlane::from_fn(20, 20, |x, y| ((5..11).contains(&x) && (4..9).contains(&y)) as u8 as f32);
        let mut o = g.clone();
        for y in 4..9 {
            for x in 5..11 {
                o.pixel_mut(x, y).copy_from_slice(&[1.0, 0.0, 0.5]);
            }
        }
        assert_eq!(masked_loss(&o, &g, &mask).unwrap(), masked_loss(&g, &g, &mask).unwrap());
    }
}
