//! Layered synthetic scenes: textured fronto-parallel planes rendered with
//! exact inverse depth, per-pixel surface labels and analytic visibility.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::image::{ImagePlane, PixelCoord, RgbdView};
use crate::math::Vec3;
use crate::rig::{PinholeCamera, RigModel};

/// Label of pixels that see the background plane.
pub const BACKGROUND: u16 = u16::MAX;

/// Axis-aligned rectangle in a layer's plane (world x, y meters), half-open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min
    }
}

/// Procedural surface color, linear RGB in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    Solid { color: [f32; 3] },
    Checker { cell_m: f64, a: [f32; 3], b: [f32; 3] },
    /// Triangle wave between `a` and `b` along x.
    Gradient { period_m: f64, a: [f32; 3], b: [f32; 3] },
    /// Three octaves of smoothed lattice noise blended between two colors.
    ValueNoise { seed: u64, cell_m: f64, a: [f32; 3], b: [f32; 3] },
}

impl Texture {
    pub fn sample(&self, x: f64, y: f64) -> [f32; 3] {
        match *self {
            Texture::Solid { color } => color,
            Texture::Checker { cell_m, a, b } => {
                let i = libm::floor(x / cell_m) as i64 + libm::floor(y / cell_m) as i64;
                if i.rem_euclid(2) == 0 {
                    a
                } else {
                    b
                }
            }
            Texture::Gradient { period_m, a, b } => {
                let f = x / period_m - libm::floor(x / period_m);
                lerp(a, b, 1.0 - (2.0 * f - 1.0).abs())
            }
            Texture::ValueNoise { seed, cell_m, a, b } => {
                let (u, v) = (x / cell_m, y / cell_m);
                let n = 0.5714285714285714 * value_noise(u, v, seed)
                    + 0.2857142857142857 * value_noise(2.0 * u, 2.0 * v, seed ^ 0x9e37)
                    + 0.14285714285714285 * value_noise(4.0 * u, 4.0 * v, seed ^ 0x7f4a);
                lerp(a, b, n)
            }
        }
    }

    fn is_valid(&self) -> bool {
        let ok = |c: &[f32; 3]| c.iter().all(|v| (0.0..=1.0).contains(v));
        match self {
            Texture::Solid { color } => ok(color),
            Texture::Checker { cell_m, a, b } | Texture::ValueNoise { cell_m, a, b, .. } => *cell_m > 0.0 && ok(a) && ok(b),
            Texture::Gradient { period_m, a, b } => *period_m > 0.0 && ok(a) && ok(b),
        }
    }
}

fn lerp(a: [f32; 3], b: [f32; 3], t: f64) -> [f32; 3] {
    let t = t.clamp(0.0, 1.0);
    core::array::from_fn(|c| (a[c] as f64 + (b[c] as f64 - a[c] as f64) * t) as f32)
}

fn lattice(ix: i64, iy: i64, seed: u64) -> f64 {
    let mut z = seed
        .wrapping_add((ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add((iy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(u: f64, v: f64, seed: u64) -> f64 {
    let (fu, fv) = (libm::floor(u), libm::floor(v));
    let (ix, iy) = (fu as i64, fv as i64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, ty) = (s(u - fu), s(v - fv));
    let top = lattice(ix, iy, seed) * (1.0 - tx) + lattice(ix + 1, iy, seed) * tx;
    let bot = lattice(ix, iy + 1, seed) * (1.0 - tx) + lattice(ix + 1, iy + 1, seed) * tx;
    top * (1.0 - ty) + bot * ty
}

/// A textured rectangle on the plane `z = depth` (world meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneLayer {
    pub depth: f64,
    pub extent: Rect,
    pub texture: Texture,
}

/// The unbounded plane behind every layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub depth: f64,
    pub texture: Texture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Near to far.
    pub layers: Vec<PlaneLayer>,
    pub background: Background,
    pub seed: u64,
}

/// Where a ray or line of sight ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Vec3,
    pub label: u16,
    /// Inverse of the camera-frame depth of `point`.
    pub inv_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    Occluded,
    OutOfFrame,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() >= BACKGROUND as usize {
            bail!(Config, "too many layers ({})", self.layers.len());
        }
        let mut prev = 0.0;
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.depth > prev) {
                bail!(Config, "layer {i}: depths must be positive and strictly increasing");
            }
            if !l.extent.is_valid() {
                bail!(Config, "layer {i}: degenerate extent");
            }
            if !l.texture.is_valid() {
                bail!(Config, "layer {i}: invalid texture");
            }
            prev = l.depth;
        }
        if !(self.background.depth > prev) || !self.background.depth.is_finite() {
            bail!(Config, "background must lie behind every layer");
        }
        if !self.background.texture.is_valid() {
            bail!(Config, "background: invalid texture");
        }
        Ok(())
    }

    fn nearest_depth(&self) -> f64 {
        self.layers.first().map_or(self.background.depth, |l| l.depth)
    }

    fn check_camera(&self, cam: &PinholeCamera) -> Result<()> {
        let z = cam.center().z;
        if z >= self.nearest_depth() {
            bail!(Config, "camera at z = {z} is not in front of the nearest layer at {}", self.nearest_depth());
        }
        Ok(())
    }

    pub fn texture_of(&self, label: u16) -> &Texture {
        if label == BACKGROUND {
            &self.background.texture
        } else {
            &self.layers[label as usize].texture
        }
    }

    fn depth_of(&self, label: u16) -> f64 {
        if label == BACKGROUND {
            self.background.depth
        } else {
            self.layers[label as usize].depth
        }
    }

    /// First surface along the ray through pixel `p`.
    pub fn trace(&self, cam: &PinholeCamera, p: PixelCoord) -> Result<Hit> {
        self.check_camera(cam)?;
        let o = cam.center();
        let d = cam.world_ray(p);
        if !(d.z > 0.0) {
            bail!(Config, "pixel ({}, {}) looks away from the scene", p.x, p.y);
        }
        Ok(self.trace_unchecked(o, d))
    }

    // `d` has unit camera-frame depth, so the ray parameter is the depth.
    fn trace_unchecked(&self, o: Vec3, d: Vec3) -> Hit {
        for (i, l) in self.layers.iter().enumerate() {
            let s = (l.depth - o.z) / d.z;
            let (x, y) = (o.x + s * d.x, o.y + s * d.y);
            if l.extent.contains(x, y) {
                return Hit { point: Vec3::new(x, y, l.depth), label: i as u16, inv_depth: 1.0 / s };
            }
        }
        let s = (self.background.depth - o.z) / d.z;
        Hit {
            point: Vec3::new(o.x + s * d.x, o.y + s * d.y, self.background.depth),
            label: BACKGROUND,
            inv_depth: 1.0 / s,
        }
    }

    /// Whether surface point `point` on layer `label` is seen by `cam`.
    pub fn visibility(&self, cam: &PinholeCamera, point: Vec3, label: u16) -> Visibility {
        match cam.project_world(point) {
            Some(p) if cam.contains(p) => {}
            _ => return Visibility::OutOfFrame,
        }
        let c = cam.center();
        let nearer = if label == BACKGROUND { self.layers.len() } else { label as usize };
        let dz = point.z - c.z;
        for l in &self.layers[..nearer] {
            let s = (l.depth - c.z) / dz;
            if s > 0.0 && s < 1.0 && l.extent.contains(c.x + s * (point.x - c.x), c.y + s * (point.y - c.y)) {
                return Visibility::Occluded;
            }
        }
        Visibility::Visible
    }

    pub fn render(&self, cam: &PinholeCamera) -> Result<Render> {
        self.validate()?;
        self.check_camera(cam)?;
        let (w, h) = (cam.width(), cam.height());
        let o = cam.center();
        let mut color = Vec::with_capacity(w * h * 3);
        let mut depth = Vec::with_capacity(w * h);
        let mut labels = Vec::with_capacity(w * h);
        let mut points = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let d = cam.world_ray(PixelCoord::new(x as f64, y as f64));
                if !(d.z > 0.0) {
                    bail!(Config, "pixel ({x}, {y}) looks away from the scene");
                }
                let hit = self.trace_unchecked(o, d);
                color.extend_from_slice(&self.texture_of(hit.label).sample(hit.point.x, hit.point.y));
                depth.push(hit.inv_depth as f32);
                labels.push(hit.label);
                points.push(hit.point);
            }
        }
        Ok(Render {
            view: RgbdView::new(ImagePlane::new(w, h, 3, color)?, ImagePlane::new(w, h, 1, depth)?)?,
            labels,
            points,
        })
    }

    /// Renders the four rig views and the analytic full-disocclusion masks
    /// of both eyes.
    pub fn render_passthrough_case(&self, rig: &RigModel) -> Result<PassthroughCase> {
        let input_left = self.render(&rig.cam_left)?;
        let input_right = self.render(&rig.cam_right)?;
        let eye_left = self.render(&rig.eye_left)?;
        let eye_right = self.render(&rig.eye_right)?;
        let disocc_left = self.hidden_mask(&eye_left, rig)?;
        let disocc_right = self.hidden_mask(&eye_right, rig)?;
        Ok(PassthroughCase { input_left, input_right, eye_left, eye_right, disocc_left, disocc_right })
    }

    /// 1 where the eye's surface point is seen by neither input camera.
    pub fn hidden_mask(&self, eye: &Render, rig: &RigModel) -> Result<ImagePlane> {
        let data = eye
            .points
            .iter()
            .zip(&eye.labels)
            .map(|(&p, &l)| {
                let hidden = self.visibility(&rig.cam_left, p, l) != Visibility::Visible
                    && self.visibility(&rig.cam_right, p, l) != Visibility::Visible;
                hidden as u8 as f32
            })
            .collect();
        ImagePlane::new(eye.view.width(), eye.view.height(), 1, data)
    }

    /// Exact inverse depth of a labelled point seen from a camera at depth
    /// `cam_z` looking straight down +z.
    pub fn fronto_inv_depth(&self, label: u16, cam_z: f64) -> f64 {
        1.0 / (self.depth_of(label) - cam_z)
    }
}

/// One rendered view with per-pixel ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub view: RgbdView,
    pub labels: Vec<u16>,
    /// World position of the surface seen at each pixel.
    pub points: Vec<Vec3>,
}

impl Render {
    pub fn label(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.view.width() + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassthroughCase {
    pub input_left: Render,
    pub input_right: Render,
    pub eye_left: Render,
    pub eye_right: Render,
    pub disocc_left: ImagePlane,
    pub disocc_right: ImagePlane,
}
