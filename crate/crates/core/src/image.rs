//! Dense raster containers shared by every stage.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Row-major grid of `f32` samples with 1 or 3 interleaved channels.
///
/// The same container carries linear color in `[0, 1]`, inverse depth in
/// 1/meters and binary masks; the role is a convention of the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            bail!(Argument, "image planes carry 1 or 3 channels, got {channels}");
        }
        if data.len() != width * height * channels {
            bail!(
                Shape,
                "{}x{}x{} plane needs {} samples, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            );
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        assert!(channels == 1 || channels == 3, "image planes carry 1 or 3 channels");
        Self { width, height, channels, data: vec![value; width * height * channels] }
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    /// Builds a single-channel plane by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, data }
    }

    /// Builds a three-channel plane by evaluating `f(x, y)` at every pixel.
    pub fn from_rgb_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, channels: 3, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn len_pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn same_size(&self, other: &ImagePlane) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x] = v;
    }

    /// Sample at `(x, y)` with coordinates clamped to the frame.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [f32; 3] {
        debug_assert_eq!(self.channels, 3);
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> ImagePlane {
        ImagePlane {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `(min, max)` over all samples; `None` for an empty plane.
    pub fn min_max(&self) -> Option<(f32, f32)> {
        let mut it = self.data.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Single-channel luma (Rec. 709 weights) of a color plane; a 1-channel
    /// plane is returned unchanged.
    pub fn luma(&self) -> ImagePlane {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2])
            .collect();
        ImagePlane { width: self.width, height: self.height, channels: 1, data }
    }

    pub fn flip_horizontal(&self) -> ImagePlane {
        let c = self.channels;
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            let row = self.row(y);
            for x in (0..self.width).rev() {
                data.extend_from_slice(&row[x * c..x * c + c]);
            }
        }
        ImagePlane { width: self.width, height: self.height, channels: c, data }
    }

    pub fn is_binary_mask(&self) -> bool {
        self.channels == 1 && self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn is_valid_color(&self) -> bool {
        self.data.iter().all(|&v| v.is_finite() && (0.0..=1.0).contains(&v))
    }

    /// Number of pixels whose (single-channel) value is non-zero.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Pixel position; integer coordinates sit at pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Color plus inverse depth at one viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdView {
    pub color: ImagePlane,
    pub inv_depth: ImagePlane,
}

impl RgbdView {
    pub fn new(color: ImagePlane, inv_depth: ImagePlane) -> Result<Self> {
        if color.channels() != 3 || inv_depth.channels() != 1 {
            bail!(Shape, "rgbd view needs a 3-channel color and 1-channel inverse depth");
        }
        if !color.same_size(&inv_depth) {
            bail!(
                Shape,
                "color {}x{} and inverse depth {}x{} differ in size",
                color.width(),
                color.height(),
                inv_depth.width(),
                inv_depth.height()
            );
        }
        Ok(Self { color, inv_depth })
    }

    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }
}

/// sRGB electro-optical transfer: encoded `[0,1]` to linear `[0,1]`.
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        libm::pow((v + 0.055) / 1.055, 2.4)
    }
}

/// Inverse of [`srgb_to_linear`].
pub fn linear_to_srgb(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * libm::pow(v, 1.0 / 2.4) - 0.055
    }
}

/// Linear value of every 8-bit sRGB code.
pub fn srgb_decode_table() -> [f32; 256] {
    let mut t = [0.0f32; 256];
    for (i, v) in t.iter_mut().enumerate() {
        *v = srgb_to_linear(i as f64 / 255.0) as f32;
    }
    t
}

/// Nearest 8-bit sRGB code for a linear value.
pub fn srgb_encode_u8(v: f32) -> u8 {
    let e = linear_to_srgb(v as f64) * 255.0;
    libm::round(e).clamp(0.0, 255.0) as u8
}
