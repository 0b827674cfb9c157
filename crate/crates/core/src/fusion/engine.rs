//! Fast forward pass over zero-bordered, channel-last tensors.

use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{self, Src};
use super::{padded_len, reflect, up2_coord, ConvLayer, FeatureMap, FusionWeights};
use crate::error::{bail, Result};
use crate::image::ImagePlane;

/// Output channels are padded to this many lanes in packed weights.
pub(crate) const LANES: usize = 16;

/// Which convolution kernel the engine runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Plain Rust, left to the compiler's auto-vectorizer.
    #[default]
    Portable,
    /// Hand-written AVX-512F kernel (x86-64 only).
    Avx512,
}

impl Backend {
    /// The fastest kernel this CPU can run.
    pub fn detect() -> Self {
        if Backend::Avx512.is_supported() {
            Backend::Avx512
        } else {
            Backend::Portable
        }
    }

    pub fn is_supported(self) -> bool {
        match self {
            Backend::Portable => true,
            Backend::Avx512 => kernels::avx512_available(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Portable => "portable",
            Backend::Avx512 => "avx512",
        }
    }
}

/// Channel-last tensor with a zero border: one pixel on the top and left,
/// and on the bottom and right enough to round the size up to a multiple of
/// 4 plus one pixel.
#[derive(Debug, Clone)]
pub(crate) struct Tensor {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    /// Padded width in pixels.
    pub pw: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        let (ph, pw) = (padded_len(h) + 2, padded_len(w) + 2);
        Self { h, w, c, pw, data: vec![0.0; ph * pw * c] }
    }

    /// Offset of interior pixel `(y, x)`.
    #[inline]
    pub fn at(&self, y: usize, x: usize) -> usize {
        ((y + 1) * self.pw + x + 1) * self.c
    }

    fn src(&self, w_off: usize) -> Src<'_> {
        Src { data: &self.data, c: self.c, row: self.pw * self.c, w_off }
    }

    fn from_feature_map(m: &FeatureMap) -> Self {
        let mut t = Self::zeros(m.height(), m.width(), m.channels());
        for y in 0..t.h {
            for x in 0..t.w {
                let o = t.at(y, x);
                for c in 0..t.c {
                    t.data[o + c] = m.get(c, y, x);
                }
            }
        }
        t
    }

    fn to_feature_map(&self, channels: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::from_fn(channels, h, w, |c, y, x| self.data[self.at(y, x) + c])
    }
}

/// A layer with weights reordered for the kernels: `weights` is
/// `[tap][in][out_padded]`; `wino` holds the Winograd-domain kernels as
/// `[36][in][out_padded]` when the backend uses them.
#[derive(Debug, Clone)]
pub(crate) struct PackedLayer {
    pub ic: usize,
    pub oc: usize,
    pub ocp: usize,
    pub weights: Vec<f32>,
    pub wino: Vec<f32>,
    pub bias: Vec<f32>,
}

impl PackedLayer {
    fn pack(l: &ConvLayer, backend: Backend) -> Self {
        let (ic, oc) = (l.in_channels, l.out_channels);
        let ocp = oc.div_ceil(LANES) * LANES;
        let mut weights = vec![0.0; 9 * ic * ocp];
        for ky in 0..3 {
            for kx in 0..3 {
                for i in 0..ic {
                    for o in 0..oc {
                        weights[((ky * 3 + kx) * ic + i) * ocp + o] = l.weight(o, i, ky, kx);
                    }
                }
            }
        }
        let wino = match backend {
            Backend::Portable => Vec::new(),
            Backend::Avx512 => {
                let mut u = vec![0.0; 36 * ic * ocp];
                for i in 0..ic {
                    for o in 0..oc {
                        let g: [[f64; 3]; 3] = core::array::from_fn(|ky| core::array::from_fn(|kx| l.weight(o, i, ky, kx) as f64));
                        let t = kernels::winograd_kernel(&g);
                        for (pos, v) in t.iter().enumerate() {
                            u[(pos * ic + i) * ocp + o] = *v as f32;
                        }
                    }
                }
                u
            }
        };
        let mut bias = vec![0.0; ocp];
        bias[..oc].copy_from_slice(&l.bias);
        Self { ic, oc, ocp, weights, wino, bias }
    }
}

fn conv_into(inputs: &[&Tensor], layer: &PackedLayer, backend: Backend, out: &mut Tensor) {
    let (h, w) = (inputs[0].h, inputs[0].w);
    debug_assert_eq!(inputs.iter().map(|t| t.c).sum::<usize>(), layer.ic);
    debug_assert!(out.h == h && out.w == w && out.c == layer.ocp);
    let mut off = 0;
    let srcs: Vec<Src<'_>> = inputs
        .iter()
        .map(|t| {
            debug_assert!(t.h == h && t.w == w);
            let s = t.src(off);
            off += t.c;
            s
        })
        .collect();
    kernels::conv3x3_relu(backend, &srcs, layer, &mut out.data, out.pw, h, w);
}

fn conv(inputs: &[&Tensor], layer: &PackedLayer, backend: Backend) -> Tensor {
    let mut out = Tensor::zeros(inputs[0].h, inputs[0].w, layer.ocp);
    conv_into(inputs, layer, backend, &mut out);
    out
}

fn pool_into(t: &Tensor, out: &mut Tensor) {
    let c = t.c;
    for y in 0..out.h {
        let (a, b) = (t.at(2 * y, 0), t.at(2 * y + 1, 0));
        let o = out.at(y, 0);
        let r0 = &t.data[a..a + 2 * out.w * c];
        let r1 = &t.data[b..b + 2 * out.w * c];
        let dst = &mut out.data[o..o + out.w * c];
        for ((d, p0), p1) in dst.chunks_exact_mut(c).zip(r0.chunks_exact(2 * c)).zip(r1.chunks_exact(2 * c)) {
            for k in 0..c {
                d[k] = (p0[k] + p0[c + k] + p1[k] + p1[c + k]) * 0.25;
            }
        }
    }
}

fn up_into(t: &Tensor, out: &mut Tensor, cols: &mut Vec<(usize, usize, f32)>) {
    let c = t.c;
    cols.clear();
    cols.extend((0..out.w).map(|x| up2_coord(x, t.w)));
    let mut top = vec![0.0f32; t.w * c];
    let mut bot = vec![0.0f32; t.w * c];
    for y in 0..out.h {
        let (y0, y1, fy) = up2_coord(y, t.h);
        top.copy_from_slice(&t.data[t.at(y0, 0)..t.at(y0, 0) + t.w * c]);
        bot.copy_from_slice(&t.data[t.at(y1, 0)..t.at(y1, 0) + t.w * c]);
        // blend the two source rows once, then interpolate along x
        for (a, b) in top.iter_mut().zip(&bot) {
            *a = *a * (1.0 - fy) + *b * fy;
        }
        let o = out.at(y, 0);
        let dst = &mut out.data[o..o + out.w * c];
        for (d, &(x0, x1, fx)) in dst.chunks_exact_mut(c).zip(cols.iter()) {
            let (p0, p1) = (&top[x0 * c..x0 * c + c], &top[x1 * c..x1 * c + c]);
            for k in 0..c {
                d[k] = p0[k] * (1.0 - fx) + p1[k] * fx;
            }
        }
    }
}

/// Runs one convolution layer on a feature map.
pub(crate) fn conv2d_single(input: &FeatureMap, layer: &ConvLayer, backend: Backend) -> Result<FeatureMap> {
    if input.channels() != layer.in_channels {
        bail!(Shape, "layer {} takes {} channels, input has {}", layer.name, layer.in_channels, input.channels());
    }
    if layer.kernel_h != 3 || layer.kernel_w != 3 {
        bail!(Shape, "layer {}: only 3x3 kernels are supported", layer.name);
    }
    let packed = PackedLayer::pack(layer, backend);
    let t = Tensor::from_feature_map(input);
    let out = conv(&[&t], &packed, backend);
    Ok(out.to_feature_map(layer.out_channels, input.height(), input.width()))
}

/// Validated, pre-packed network ready for inference. Immutable and
/// shareable between threads.
#[derive(Debug, Clone)]
pub struct FusionEngine {
    layers: Vec<PackedLayer>,
    backend: Backend,
}

impl FusionEngine {
    pub fn new(weights: &FusionWeights, backend: Backend) -> Result<Self> {
        weights.validate()?;
        if !backend.is_supported() {
            bail!(Config, "the {} fusion kernel is not supported on this CPU", backend.name());
        }
        Ok(Self { layers: weights.layers.iter().map(|l| PackedLayer::pack(l, backend)).collect(), backend })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Final color for one eye, clamped to `[0, 1]`.
    pub fn fuse(&self, f_left: &ImagePlane, f_right: &ImagePlane) -> Result<ImagePlane> {
        self.fuse_with(&mut FusionScratch::default(), f_left, f_right)
    }

    /// Like [`fuse`](Self::fuse), reusing the intermediate buffers in
    /// `scratch` from earlier calls of the same size.
    pub fn fuse_with(&self, scratch: &mut FusionScratch, f_left: &ImagePlane, f_right: &ImagePlane) -> Result<ImagePlane> {
        let (out, (w, h)) = self.run(scratch, f_left, f_right)?;
        let mut img = ImagePlane::zeros(w, h, 3);
        for (y, row) in img.data_mut().chunks_exact_mut(3 * w).enumerate() {
            let o = out.at(y, 0);
            for (d, s) in row.chunks_exact_mut(3).zip(out.data[o..o + w * out.c].chunks_exact(out.c)) {
                for k in 0..3 {
                    d[k] = s[k].min(1.0);
                }
            }
        }
        Ok(img)
    }

    /// Output of the last layer before clamping, cropped to the input size.
    pub fn forward(&self, f_left: &ImagePlane, f_right: &ImagePlane) -> Result<FeatureMap> {
        let mut scratch = FusionScratch::default();
        let (out, (w, h)) = self.run(&mut scratch, f_left, f_right)?;
        Ok(out.to_feature_map(self.layers[10].oc, h, w))
    }

    fn run<'s>(&self, s: &'s mut FusionScratch, f_left: &ImagePlane, f_right: &ImagePlane) -> Result<(&'s Tensor, (usize, usize))> {
        if !f_left.same_size(f_right) || f_left.channels() != 3 || f_right.channels() != 3 {
            bail!(Shape, "fusion inputs must be two RGB images of equal size");
        }
        let (w, h) = (f_left.width(), f_left.height());
        if w == 0 || h == 0 {
            bail!(Shape, "fusion input is empty");
        }
        let (wp, hp) = (padded_len(w), padded_len(h));
        let (w2, h2, w4, h4) = (wp / 2, hp / 2, wp / 4, hp / 4);
        let l = &self.layers;
        let b = self.backend;
        let input = slot(&mut s.input, hp, wp, 6);
        for y in 0..hp {
            let (sy, o) = (reflect(y, h), input.at(y, 0));
            let (rl, rr) = (f_left.row(sy), f_right.row(sy));
            for (x, d) in input.data[o..o + 6 * wp].chunks_exact_mut(6).enumerate() {
                let sx = 3 * reflect(x, w);
                d[..3].copy_from_slice(&rl[sx..sx + 3]);
                d[3..].copy_from_slice(&rr[sx..sx + 3]);
            }
        }
        conv_into(&[input], &l[0], b, slot(&mut s.full_a, hp, wp, l[0].ocp));
        conv_into(&[slot(&mut s.full_a, hp, wp, l[0].ocp)], &l[1], b, slot(&mut s.c1, hp, wp, l[1].ocp));
        pool_into(slot(&mut s.c1, hp, wp, l[1].ocp), slot(&mut s.pool1, h2, w2, l[1].ocp));
        conv_into(&[slot(&mut s.pool1, h2, w2, l[1].ocp)], &l[2], b, slot(&mut s.half_a, h2, w2, l[2].ocp));
        conv_into(&[slot(&mut s.half_a, h2, w2, l[2].ocp)], &l[3], b, slot(&mut s.c3, h2, w2, l[3].ocp));
        pool_into(slot(&mut s.c3, h2, w2, l[3].ocp), slot(&mut s.pool3, h4, w4, l[3].ocp));
        conv_into(&[slot(&mut s.pool3, h4, w4, l[3].ocp)], &l[4], b, slot(&mut s.quarter_a, h4, w4, l[4].ocp));
        conv_into(&[slot(&mut s.quarter_a, h4, w4, l[4].ocp)], &l[5], b, slot(&mut s.quarter_b, h4, w4, l[5].ocp));
        up_into(slot(&mut s.quarter_b, h4, w4, l[5].ocp), slot(&mut s.up5, h2, w2, l[5].ocp), &mut s.cols);
        conv_into(&[slot(&mut s.up5, h2, w2, l[5].ocp), slot(&mut s.c3, h2, w2, l[3].ocp)], &l[6], b, slot(&mut s.half_a, h2, w2, l[6].ocp));
        conv_into(&[slot(&mut s.half_a, h2, w2, l[6].ocp)], &l[7], b, slot(&mut s.half_b, h2, w2, l[7].ocp));
        up_into(slot(&mut s.half_b, h2, w2, l[7].ocp), slot(&mut s.up7, hp, wp, l[7].ocp), &mut s.cols);
        conv_into(&[slot(&mut s.up7, hp, wp, l[7].ocp), slot(&mut s.c1, hp, wp, l[1].ocp)], &l[8], b, slot(&mut s.full_a, hp, wp, l[8].ocp));
        conv_into(&[slot(&mut s.full_a, hp, wp, l[8].ocp)], &l[9], b, slot(&mut s.full_b, hp, wp, l[9].ocp));
        conv_into(&[slot(&mut s.full_b, hp, wp, l[9].ocp)], &l[10], b, slot(&mut s.full_a, hp, wp, l[10].ocp));
        Ok((slot(&mut s.full_a, hp, wp, l[10].ocp), (w, h)))
    }
}

/// Intermediate tensors kept between [`FusionEngine::fuse_with`] calls. One
/// per thread; buffers are reallocated only when the image size changes.
#[derive(Debug, Default)]
pub struct FusionScratch {
    input: Option<Tensor>,
    full_a: Option<Tensor>,
    full_b: Option<Tensor>,
    c1: Option<Tensor>,
    up7: Option<Tensor>,
    pool1: Option<Tensor>,
    half_a: Option<Tensor>,
    half_b: Option<Tensor>,
    c3: Option<Tensor>,
    up5: Option<Tensor>,
    pool3: Option<Tensor>,
    quarter_a: Option<Tensor>,
    quarter_b: Option<Tensor>,
    cols: Vec<(usize, usize, f32)>,
}

/// Returns the tensor in `slot`, replacing it if its shape differs. Writers
/// only touch interior pixels, so a reused tensor's border stays zero.
fn slot(slot: &mut Option<Tensor>, h: usize, w: usize, c: usize) -> &mut Tensor {
    match slot {
        Some(t) if t.h == h && t.w == w && t.c == c => {}
        _ => *slot = Some(Tensor::zeros(h, w, c)),
    }
    slot.as_mut().unwrap()
}
