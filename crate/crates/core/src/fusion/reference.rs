//! Straightforward forward pass: explicit concatenation, zero padding and a
//! plain loop nest per convolution, accumulating in `f64`. Slow; used as the
//! oracle for [`super::FusionEngine`].

use super::{avg_pool2, bilinear_up2, concat, padded_len, reflect, ConvLayer, FeatureMap, FusionWeights};
use crate::error::{bail, Result};
use crate::image::ImagePlane;

/// 3×3 zero-padded convolution, bias, ReLU.
pub fn conv2d(input: &FeatureMap, layer: &ConvLayer) -> Result<FeatureMap> {
    if input.channels() != layer.in_channels {
        bail!(Shape, "layer {} takes {} channels, input has {}", layer.name, layer.in_channels, input.channels());
    }
    let (h, w) = (input.height() as isize, input.width() as isize);
    let (kh, kw) = (layer.kernel_h as isize, layer.kernel_w as isize);
    Ok(FeatureMap::from_fn(layer.out_channels, input.height(), input.width(), |o, y, x| {
        let mut acc = layer.bias[o] as f64;
        for i in 0..layer.in_channels {
            for ky in 0..kh {
                for kx in 0..kw {
                    let yy = y as isize + ky - kh / 2;
                    let xx = x as isize + kx - kw / 2;
                    if yy < 0 || xx < 0 || yy >= h || xx >= w {
                        continue;
                    }
                    acc += layer.weight(o, i, ky as usize, kx as usize) as f64 * input.get(i, yy as usize, xx as usize) as f64;
                }
            }
        }
        acc.max(0.0) as f32
    }))
}

/// Last-layer activations before clamping, cropped to the input size.
pub fn forward(f_left: &ImagePlane, f_right: &ImagePlane, weights: &FusionWeights) -> Result<FeatureMap> {
    weights.validate()?;
    if !f_left.same_size(f_right) || f_left.channels() != 3 || f_right.channels() != 3 {
        bail!(Shape, "fusion inputs must be two RGB images of equal size");
    }
    let (w, h) = (f_left.width(), f_left.height());
    let (wp, hp) = (padded_len(w), padded_len(h));
    let input = FeatureMap::from_fn(6, hp, wp, |c, y, x| {
        let (sx, sy) = (reflect(x, w), reflect(y, h));
        if c < 3 {
            f_left.rgb(sx, sy)[c]
        } else {
            f_right.rgb(sx, sy)[c - 3]
        }
    });
    let l = &weights.layers;
    let c0 = conv2d(&input, &l[0])?;
    let c1 = conv2d(&c0, &l[1])?;
    let c2 = conv2d(&avg_pool2(&c1)?, &l[2])?;
    let c3 = conv2d(&c2, &l[3])?;
    let c4 = conv2d(&avg_pool2(&c3)?, &l[4])?;
    let c5 = conv2d(&c4, &l[5])?;
    let c6 = conv2d(&concat(&bilinear_up2(&c5)?, &c3)?, &l[6])?;
    let c7 = conv2d(&c6, &l[7])?;
    let c8 = conv2d(&concat(&bilinear_up2(&c7)?, &c1)?, &l[8])?;
    let c9 = conv2d(&c8, &l[9])?;
    let c10 = conv2d(&c9, &l[10])?;
    Ok(FeatureMap::from_fn(3, h, w, |c, y, x| c10.get(c, y, x)))
}

/// Clamped RGB output.
pub fn fuse(f_left: &ImagePlane, f_right: &ImagePlane, weights: &FusionWeights) -> Result<ImagePlane> {
    Ok(forward(f_left, f_right, weights)?.to_rgb()?.map(|v| v.min(1.0)))
}
