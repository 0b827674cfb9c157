//! The fusion U-Net: eleven 3×3 convolutions with two pooling levels and two
//! skip connections, merging the two filtered warps of one eye into the
//! final color image.
//!
//! ```text
//! conv0  6→16   conv1 16→16            full resolution
//! pool
//! conv2 16→32   conv3 32→32            1/2
//! pool
//! conv4 32→64   conv5 64→64            1/4
//! up, concat conv3
//! conv6 96→32   conv7 32→32            1/2
//! up, concat conv1
//! conv8 48→16   conv9 16→16  conv10 16→3
//! ```
//!
//! Every convolution is followed by a ReLU and the output is clamped to 1.
//! [`FusionEngine`] is the fast implementation; [`reference`] is a direct
//! transcription used to check it.

mod engine;
mod kernels;
pub mod reference;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::ImagePlane;

pub use engine::{Backend, FusionEngine, FusionScratch};

/// Shape of one layer of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub name: &'static str,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
}

const fn spec(name: &'static str, in_channels: usize, out_channels: usize) -> ConvLayerSpec {
    ConvLayerSpec { name, in_channels, out_channels, kernel_h: 3, kernel_w: 3 }
}

pub const LAYER_SPECS: [ConvLayerSpec; 11] = [
    spec("conv0", 6, 16),
    spec("conv1", 16, 16),
    spec("conv2", 16, 32),
    spec("conv3", 32, 32),
    spec("conv4", 32, 64),
    spec("conv5", 64, 64),
    spec("conv6", 96, 32),
    spec("conv7", 32, 32),
    spec("conv8", 48, 16),
    spec("conv9", 16, 16),
    spec("conv10", 16, 3),
];

impl ConvLayerSpec {
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + self.out_channels
    }
}

/// Total number of weights and biases of the network.
pub fn param_count() -> usize {
    LAYER_SPECS.iter().map(ConvLayerSpec::param_count).sum()
}

/// One convolution's parameters. `weights` is laid out `(out, in, kh, kw)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvLayer {
    pub fn zeros(spec: &ConvLayerSpec) -> Self {
        Self {
            name: spec.name.to_string(),
            in_channels: spec.in_channels,
            out_channels: spec.out_channels,
            kernel_h: spec.kernel_h,
            kernel_w: spec.kernel_w,
            weights: vec![0.0; spec.weight_len()],
            bias: vec![0.0; spec.out_channels],
        }
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.weights[((o * self.in_channels + i) * self.kernel_h + ky) * self.kernel_w + kx]
    }

    fn check(&self, spec: &ConvLayerSpec) -> Result<()> {
        let n = &self.name;
        if self.name != spec.name {
            bail!(Shape, "expected layer {} but found {n}", spec.name);
        }
        let got = (self.in_channels, self.out_channels, self.kernel_h, self.kernel_w);
        let want = (spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w);
        if got != want {
            bail!(
                Shape,
                "layer {n}: declared {}/{} {}x{}, expected {}/{} {}x{}",
                got.0,
                got.1,
                got.2,
                got.3,
                want.0,
                want.1,
                want.2,
                want.3
            );
        }
        if self.weights.len() != spec.weight_len() || self.bias.len() != spec.out_channels {
            bail!(Shape, "layer {n}: {} weights and {} biases for a {}/{} layer", self.weights.len(), self.bias.len(), got.0, got.1);
        }
        if let Some(v) = self.weights.iter().chain(&self.bias).find(|v| !v.is_finite()) {
            bail!(Shape, "layer {n}: non-finite parameter {v}");
        }
        Ok(())
    }
}

/// Parameters of all eleven layers, in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub layers: Vec<ConvLayer>,
}

impl FusionWeights {
    pub fn zeros() -> Self {
        Self { layers: LAYER_SPECS.iter().map(ConvLayer::zeros).collect() }
    }

    /// Fills every weight with `f(layer, index)` and every bias with
    /// `g(layer, index)`, where `index` counts in storage order.
    pub fn from_fn(mut f: impl FnMut(&ConvLayerSpec, usize) -> f32, mut g: impl FnMut(&ConvLayerSpec, usize) -> f32) -> Self {
        let layers = LAYER_SPECS
            .iter()
            .map(|s| {
                let mut l = ConvLayer::zeros(s);
                l.weights.iter_mut().enumerate().for_each(|(i, w)| *w = f(s, i));
                l.bias.iter_mut().enumerate().for_each(|(i, b)| *b = g(s, i));
                l
            })
            .collect();
        Self { layers }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != LAYER_SPECS.len() {
            bail!(Shape, "expected {} layers, found {}", LAYER_SPECS.len(), self.layers.len());
        }
        for (l, s) in self.layers.iter().zip(&LAYER_SPECS) {
            l.check(s)?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }
}

/// Channel-major feature tensor, `data[(c·height + y)·width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            bail!(Shape, "feature map {channels}x{height}x{width} needs {} values, got {}", channels * height * width, data.len());
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut m = Self::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    m.data[(c * height + y) * width + x] = f(c, y, x);
                }
            }
        }
        m
    }

    /// Channels of `planes` stacked in order.
    pub fn from_planes(planes: &[&ImagePlane]) -> Result<Self> {
        let Some(first) = planes.first() else { bail!(Shape, "no planes to stack") };
        let (w, h) = (first.width(), first.height());
        let mut data = Vec::new();
        for p in planes {
            if p.width() != w || p.height() != h {
                bail!(Shape, "stacked planes differ in size");
            }
            for c in 0..p.channels() {
                data.extend(p.data().iter().skip(c).step_by(p.channels()));
            }
        }
        let channels = data.len() / (w * h).max(1);
        Self::new(channels, h, w, data)
    }

    /// First three channels as an RGB plane.
    pub fn to_rgb(&self) -> Result<ImagePlane> {
        if self.channels < 3 {
            bail!(Shape, "need 3 channels, have {}", self.channels);
        }
        let n = self.width * self.height;
        Ok(ImagePlane::from_rgb_fn(self.width, self.height, |x, y| {
            let i = y * self.width + x;
            [self.data[i], self.data[n + i], self.data[2 * n + i]]
        }))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> f32 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max)
    }
}

/// 3×3 same-size convolution with zero padding, bias and ReLU, run on the
/// portable engine kernel.
pub fn conv2d(input: &FeatureMap, layer: &ConvLayer) -> Result<FeatureMap> {
    engine::conv2d_single(input, layer, Backend::Portable)
}

/// 2×2 mean pooling with stride 2.
pub fn avg_pool2(input: &FeatureMap) -> Result<FeatureMap> {
    let (c, h, w) = (input.channels, input.height, input.width);
    if h == 0 || w == 0 || c == 0 {
        bail!(Shape, "cannot pool an empty feature map");
    }
    if h % 2 != 0 || w % 2 != 0 {
        bail!(Shape, "pooling needs even dimensions, got {h}x{w}");
    }
    Ok(FeatureMap::from_fn(c, h / 2, w / 2, |ch, y, x| {
        let s = input.get(ch, 2 * y, 2 * x) + input.get(ch, 2 * y, 2 * x + 1) + input.get(ch, 2 * y + 1, 2 * x) + input.get(ch, 2 * y + 1, 2 * x + 1);
        s * 0.25
    }))
}

/// Source coordinate and weight for corner-aligned 2× upsampling of an axis
/// with `n` samples.
#[inline]
pub(crate) fn up2_coord(i: usize, n: usize) -> (usize, usize, f32) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let s = i as f64 * (n - 1) as f64 / (2 * n - 1) as f64;
    let i0 = (libm::floor(s) as usize).min(n - 1);
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, (s - i0 as f64) as f32)
}

/// 2× bilinear upsampling; the corner samples of input and output coincide.
pub fn bilinear_up2(input: &FeatureMap) -> Result<FeatureMap> {
    let (c, h, w) = (input.channels, input.height, input.width);
    if h == 0 || w == 0 || c == 0 {
        bail!(Shape, "cannot upsample an empty feature map");
    }
    Ok(FeatureMap::from_fn(c, 2 * h, 2 * w, |ch, y, x| {
        let (y0, y1, fy) = up2_coord(y, h);
        let (x0, x1, fx) = up2_coord(x, w);
        let top = input.get(ch, y0, x0) * (1.0 - fx) + input.get(ch, y0, x1) * fx;
        let bot = input.get(ch, y1, x0) * (1.0 - fx) + input.get(ch, y1, x1) * fx;
        top * (1.0 - fy) + bot * fy
    }))
}

/// Channel concatenation, `a` first.
pub fn concat(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    if a.height != b.height || a.width != b.width {
        bail!(Shape, "concat of {}x{} and {}x{}", a.height, a.width, b.height, b.width);
    }
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    FeatureMap::new(a.channels + b.channels, a.height, a.width, data)
}

/// Reflect index `i` into `0..n` (edge sample not repeated).
#[inline]
pub(crate) fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Smallest multiple of 4 not below `n`.
pub fn padded_len(n: usize) -> usize {
    n.div_ceil(4) * 4
}

/// Fuses the two filtered warps of one eye with the portable kernel.
pub fn fuse(f_left: &ImagePlane, f_right: &ImagePlane, weights: &FusionWeights) -> Result<ImagePlane> {
    FusionEngine::new(weights, Backend::Portable)?.fuse(f_left, f_right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count() {
        assert_eq!(param_count(), 119_123);
        assert_eq!(FusionWeights::zeros().param_count(), 119_123);
    }

    #[test]
    fn validation_names_layer() {
        let mut w = FusionWeights::zeros();
        w.layers[3].out_channels = 33;
        let e = w.validate().unwrap_err();
        assert!(alloc::format!("{e}").contains("conv3"), "{e}");
        let mut w = FusionWeights::zeros();
        w.layers[0].bias[0] = f32::NAN;
        assert!(w.validate().is_err());
    }

    #[test]
    fn pooling_examples() {
        let m = FeatureMap::new(1, 2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(avg_pool2(&m).unwrap().data(), &[1.5]);
        let c = FeatureMap::from_fn(2, 6, 4, |_, _, _| 0.7);
        assert!(avg_pool2(&c).unwrap().data().iter().all(|&v| v == 0.7));
        assert!(bilinear_up2(&c).unwrap().data().iter().all(|&v| (v - 0.7).abs() < 1e-7));
        assert!(avg_pool2(&FeatureMap::zeros(1, 3, 4)).is_err());
        assert!(avg_pool2(&FeatureMap::zeros(1, 0, 0)).is_err());
        assert!(bilinear_up2(&FeatureMap::zeros(1, 0, 4)).is_err());
    }

    #[test]
    fn up_then_pool_of_ramp_is_affine() {
        // With corner alignment the ramp v = a·x comes back as
        // a(W−1)(4x+1)/(2(2W−1)), not exactly a·x.
        let (w, a) = (8usize, 0.3f64);
        let ramp = FeatureMap::from_fn(1, 4, w, |_, _, x| (a * x as f64) as f32);
        let back = avg_pool2(&bilinear_up2(&ramp).unwrap()).unwrap();
        for y in 0..4 {
            for x in 0..w {
                let expect = a * (w - 1) as f64 * (4 * x + 1) as f64 / (2.0 * (2 * w - 1) as f64);
                assert!((back.get(0, y, x) as f64 - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (0..8).map(|i| reflect(i, 3)).collect();
        assert_eq!(got, [0, 1, 2, 1, 0, 1, 2, 1]);
        assert_eq!(reflect(5, 1), 0);
        assert_eq!(padded_len(5), 8);
        assert_eq!(padded_len(8), 8);
    }

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_weights(rng: &mut ChaCha8Rng) -> FusionWeights {
        let mut layers = FusionWeights::zeros().layers;
        for l in &mut layers {
            let bound = (6.0 / (9 * l.in_channels) as f32).sqrt();
            l.weights.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
        FusionWeights { layers }
    }

    fn random_rgb(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlane {
        ImagePlane::from_rgb_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    fn backends() -> Vec<Backend> {
        [Backend::Portable, Backend::Avx512].into_iter().filter(|b| b.is_supported()).collect()
    }

    #[test]
    fn conv_zero_and_identity() {
        let input = FeatureMap::from_fn(6, 5, 7, |c, y, x| (c + y * x) as f32 * 0.1);
        let zero = ConvLayer::zeros(&LAYER_SPECS[0]);
        assert!(conv2d(&input, &zero).unwrap().data().iter().all(|&v| v == 0.0));
        let mut id = ConvLayer::zeros(&spec("id", 6, 6));
        for c in 0..6 {
            id.weights[((c * 6 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        assert_eq!(conv2d(&input, &id).unwrap(), input);
        for b in backends() {
            // the transformed-domain kernel is exact only up to rounding
            assert!(engine::conv2d_single(&input, &id, b).unwrap().max_abs_diff(&input) < 1e-6);
        }
        assert!(conv2d(&FeatureMap::zeros(5, 4, 4), &zero).is_err());
    }

    #[test]
    fn conv_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in &LAYER_SPECS {
            let mut l = ConvLayer::zeros(s);
            l.weights.iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            let input = FeatureMap::from_fn(s.in_channels, 16, 16, |_, _, _| rng.random());
            let want = reference::conv2d(&input, &l).unwrap();
            // f32 rounding grows with the number of summed terms
            let scale = want.data().iter().fold(1.0f32, |m, v| m.max(v.abs()));
            for b in backends() {
                let got = engine::conv2d_single(&input, &l, b).unwrap();
                assert!(got.max_abs_diff(&want) < 1e-5 * scale, "{} {}: {}", s.name, b.name(), got.max_abs_diff(&want));
            }
        }
    }

    #[test]
    fn engine_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (w, h) in [(16, 12), (13, 10), (1, 1), (35, 6)] {
            let weights = random_weights(&mut rng);
            let (fl, fr) = (random_rgb(&mut rng, w, h), random_rgb(&mut rng, w, h));
            let want = reference::forward(&fl, &fr, &weights).unwrap();
            assert!(want.data().iter().any(|&v| v > 0.0));
            for b in backends() {
                let got = FusionEngine::new(&weights, b).unwrap().forward(&fl, &fr).unwrap();
                assert_eq!((got.width(), got.height(), got.channels()), (w, h, 3));
                assert!(got.max_abs_diff(&want) < 1e-4, "{w}x{h} {}: {}", b.name(), got.max_abs_diff(&want));
            }
        }
    }

    #[test]
    fn zero_weights_give_black_and_output_is_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (fl, fr) = (random_rgb(&mut rng, 8, 8), random_rgb(&mut rng, 8, 8));
        let out = fuse(&fl, &fr, &FusionWeights::zeros()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        let big = FusionWeights::from_fn(|_, _| 0.5, |_, _| 1.0);
        let out = fuse(&fl, &fr, &big).unwrap();
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(out.data().contains(&1.0));
    }
}
