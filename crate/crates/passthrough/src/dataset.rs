//! Synthetic evaluation datasets on disk.
//!
//! ```text
//! out/
//!   manifest.json
//!   case_000/
//!     input_l.png  input_r.png  eye_l_gt.png  eye_r_gt.png
//!     input_l.pfm  input_r.pfm  eye_l_gt.pfm  eye_r_gt.pfm   inverse depth, 1/m
//!     disocc_l.pfm disocc_r.pfm                               1 = seen by neither camera
//! ```
//!
//! Every case is a pure function of the dataset seed and its index.

use std::path::{Path, PathBuf};

use passthrough_core::rig::{Intrinsics, RigModel, RigParams};
use passthrough_core::scene::{Background, PlaneLayer, Rect, SceneSpec, Texture};
use passthrough_core::ImagePlane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageContext};
use crate::io::{load_color, load_mask, load_pfm, read_json, save_color, save_pfm, write_json};

pub const MANIFEST_VERSION: u32 = 1;

/// Generation parameters. Defaults give the evaluation set: ten 512×512
/// scenes with IPDs spread over 4.8–8.0 cm behind a 10 cm camera baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub scenes: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub ipd_min_m: f64,
    pub ipd_max_m: f64,
    pub baseline_m: f64,
    pub hmd_thickness_m: f64,
    pub camera_fov_deg: f64,
    /// Narrower than the cameras so the eye frusta stay covered by the
    /// inputs beyond about half a meter.
    pub eye_fov_deg: f64,
    pub interest_angle_deg: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            scenes: 10,
            width: 512,
            height: 512,
            seed: 0,
            ipd_min_m: 0.048,
            ipd_max_m: 0.080,
            baseline_m: 0.10,
            hmd_thickness_m: 0.093,
            camera_fov_deg: 90.0,
            eye_fov_deg: 80.0,
            interest_angle_deg: 25.0,
        }
    }
}

impl DatasetSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.scenes == 0 || self.width < 16 || self.height < 16 {
            return bad("dataset needs at least one scene of at least 16x16 pixels");
        }
        if !(0.0 < self.ipd_min_m && self.ipd_min_m <= self.ipd_max_m && self.ipd_max_m <= self.baseline_m) {
            return bad("IPD range must satisfy 0 < min <= max <= baseline");
        }
        if !(0.0 < self.eye_fov_deg && self.eye_fov_deg <= self.camera_fov_deg && self.camera_fov_deg < 170.0) {
            return bad("fields of view must satisfy 0 < eye <= camera < 170 degrees");
        }
        Ok(())
    }

    /// Rig of case `i`.
    pub fn rig(&self, i: usize) -> RigParams {
        let s = if self.scenes > 1 { i as f64 / (self.scenes - 1) as f64 } else { 0.5 };
        let ipd = self.ipd_min_m + s * (self.ipd_max_m - self.ipd_min_m);
        let focal = |deg: f64| Intrinsics::from_horizontal_fov(self.width, self.height, deg.to_radians()).fx;
        RigParams {
            width: self.width,
            height: self.height,
            focal_px: focal(self.camera_fov_deg),
            hmd_thickness_m: self.hmd_thickness_m,
            camera_offset_m: (self.baseline_m - ipd) / 2.0,
            ipd_m: ipd,
            interest_angle_rad: self.interest_angle_deg.to_radians(),
            eye_focal_px: Some(focal(self.eye_fov_deg)),
        }
    }

    /// Scene of case `i`. The last case of a set of three or more is the
    /// low-texture one.
    pub fn scene(&self, i: usize) -> SceneSpec {
        let kind = if self.scenes >= 3 && i == self.scenes - 1 { SceneKind::LowTexture } else { SceneKind::Occluders };
        let seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
        random_scene(&mut ChaCha8Rng::seed_from_u64(seed), kind, self.camera_fov_deg.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// One plane covering the whole view in front of the background.
    Plain,
    /// One to three rectangles floating between 1.0 and 2.0 m in front of a
    /// background at 3 to 5 m.
    Occluders,
    /// A faint gradient backdrop with one faint rectangle.
    LowTexture,
}

fn palette(rng: &mut ChaCha8Rng, contrast: f32) -> ([f32; 3], [f32; 3]) {
    let base: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.05..0.95 - contrast));
    let tint: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.8..1.0));
    (base, std::array::from_fn(|c| base[c] + contrast * tint[c]))
}

#[derive(Clone, Copy)]
enum Style {
    /// Value noise or gradients, no hard edges.
    Smooth,
    /// Mostly value noise, sometimes a fine checker.
    Occluder,
    /// Value noise only.
    Noise,
}

/// A contrasty texture whose features span several pixels: sizes are
/// fractions of `half_view_m`, the half-width of the view at the layer.
fn textured(rng: &mut ChaCha8Rng, half_view_m: f64, style: Style) -> Texture {
    let (a, b) = palette(rng, 0.45);
    let kind = match style {
        Style::Smooth => rng.random_range(1..4),
        Style::Occluder => [0, 2, 2, 2][rng.random_range(0..4)],
        Style::Noise => 2,
    };
    match kind {
        0 => Texture::Checker { cell_m: half_view_m * rng.random_range(0.04..0.08), a, b },
        1 => Texture::Gradient { period_m: half_view_m * rng.random_range(0.15..0.4), a, b },
        _ => Texture::ValueNoise { seed: rng.random(), cell_m: half_view_m * rng.random_range(0.08..0.2), a, b },
    }
}

/// A random layered scene seen by cameras with horizontal field of view
/// `fov_rad` near the origin looking down +z.
pub fn random_scene(rng: &mut ChaCha8Rng, kind: SceneKind, fov_rad: f64) -> SceneSpec {
    let half = (fov_rad / 2.0).tan();
    let seed = rng.random();
    match kind {
        SceneKind::Plain => {
            let depth = rng.random_range(1.0..3.0);
            let big = Rect::new(-1e3, 1e3, -1e3, 1e3);
            let layers = vec![PlaneLayer { depth, extent: big, texture: textured(rng, half * depth, Style::Smooth) }];
            let bg = depth + 1.0;
            SceneSpec { layers, background: Background { depth: bg, texture: textured(rng, half * bg, Style::Smooth) }, seed }
        }
        SceneKind::Occluders => {
            let n = rng.random_range(1..=3usize);
            let mut depths: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
            depths.sort_by(f64::total_cmp);
            for i in 1..n {
                depths[i] = depths[i].max(depths[i - 1] + 0.05);
            }
            let layers = depths
                .into_iter()
                .map(|depth| {
                    let reach = 0.7 * half * depth;
                    let (w, h) = (rng.random_range(0.2..0.5) * depth, rng.random_range(0.2..0.6) * depth);
                    let (cx, cy) = (rng.random_range(-reach..reach), rng.random_range(-reach..reach));
                    let extent = Rect::new(cx - w / 2.0, cx + w / 2.0, cy - h / 2.0, cy + h / 2.0);
                    PlaneLayer { depth, extent, texture: textured(rng, half * depth, Style::Occluder) }
                })
                .collect();
            let bg = rng.random_range(3.0..5.0);
            SceneSpec { layers, background: Background { depth: bg, texture: textured(rng, half * bg, Style::Noise) }, seed }
        }
        SceneKind::LowTexture => {
            let (a, b) = palette(rng, 0.04);
            let (c, d) = palette(rng, 0.04);
            let depth = rng.random_range(1.0..2.0);
            let s = 0.3 * depth;
            let layers = vec![PlaneLayer { depth, extent: Rect::new(-s, s, -s, s), texture: Texture::Gradient { period_m: 2.0, a, b } }];
            let background = Background { depth: rng.random_range(3.0..5.0), texture: Texture::Gradient { period_m: 4.0, a: c, b: d } };
            SceneSpec { layers, background, seed }
        }
    }
}

/// File names inside one case directory, relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFiles {
    pub input_l: String,
    pub input_r: String,
    pub eye_l_gt: String,
    pub eye_r_gt: String,
    pub input_l_depth: String,
    pub input_r_depth: String,
    pub eye_l_gt_depth: String,
    pub eye_r_gt_depth: String,
    pub disocc_l: String,
    pub disocc_r: String,
}

impl CaseFiles {
    fn for_case(name: &str) -> Self {
        let f = |stem: &str, ext: &str| format!("{name}/{stem}.{ext}");
        Self {
            input_l: f("input_l", "png"),
            input_r: f("input_r", "png"),
            eye_l_gt: f("eye_l_gt", "png"),
            eye_r_gt: f("eye_r_gt", "png"),
            input_l_depth: f("input_l", "pfm"),
            input_r_depth: f("input_r", "pfm"),
            eye_l_gt_depth: f("eye_l_gt", "pfm"),
            eye_r_gt_depth: f("eye_r_gt", "pfm"),
            disocc_l: f("disocc_l", "pfm"),
            disocc_r: f("disocc_r", "pfm"),
        }
    }

    pub fn all(&self) -> [&str; 10] {
        [
            &self.input_l,
            &self.input_r,
            &self.eye_l_gt,
            &self.eye_r_gt,
            &self.input_l_depth,
            &self.input_r_depth,
            &self.eye_l_gt_depth,
            &self.eye_r_gt_depth,
            &self.disocc_l,
            &self.disocc_r,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub name: String,
    pub rig: RigParams,
    pub scene: SceneSpec,
    pub files: CaseFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub spec: DatasetSpec,
    pub cases: Vec<CaseEntry>,
}

/// One case loaded back from disk.
#[derive(Debug, Clone)]
pub struct CaseData {
    pub name: String,
    pub rig: RigParams,
    pub input_l: ImagePlane,
    pub input_r: ImagePlane,
    pub eye_l_gt: ImagePlane,
    pub eye_r_gt: ImagePlane,
    pub input_l_depth: ImagePlane,
    pub input_r_depth: ImagePlane,
    pub disocc_l: ImagePlane,
    pub disocc_r: ImagePlane,
}

/// Renders every case and writes the dataset. Returns the manifest.
pub fn generate(spec: &DatasetSpec, out: &Path) -> Result<Manifest> {
    spec.validate()?;
    let mut cases = Vec::with_capacity(spec.scenes);
    for i in 0..spec.scenes {
        let name = format!("case_{i:03}");
        let rig = spec.rig(i);
        let scene = spec.scene(i);
        let model = RigModel::symmetric(&rig).stage("render")?;
        let case = scene.render_passthrough_case(&model).stage("render")?;
        let files = CaseFiles::for_case(&name);
        let p = |f: &str| out.join(f);
        save_color(&case.input_left.view.color, &p(&files.input_l))?;
        save_color(&case.input_right.view.color, &p(&files.input_r))?;
        save_color(&case.eye_left.view.color, &p(&files.eye_l_gt))?;
        save_color(&case.eye_right.view.color, &p(&files.eye_r_gt))?;
        save_pfm(&case.input_left.view.inv_depth, &p(&files.input_l_depth))?;
        save_pfm(&case.input_right.view.inv_depth, &p(&files.input_r_depth))?;
        save_pfm(&case.eye_left.view.inv_depth, &p(&files.eye_l_gt_depth))?;
        save_pfm(&case.eye_right.view.inv_depth, &p(&files.eye_r_gt_depth))?;
        save_pfm(&case.disocc_left, &p(&files.disocc_l))?;
        save_pfm(&case.disocc_right, &p(&files.disocc_r))?;
        cases.push(CaseEntry { name, rig, scene, files });
    }
    let manifest = Manifest { version: MANIFEST_VERSION, spec: spec.clone(), cases };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// A dataset directory opened through its manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest: Manifest = read_json(&root.join("manifest.json"))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::format(&root.join("manifest.json"), format!("unsupported manifest version {}", manifest.version)));
        }
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    pub fn len(&self) -> usize {
        self.manifest.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.cases.is_empty()
    }

    pub fn load(&self, i: usize) -> Result<CaseData> {
        let e = &self.manifest.cases[i];
        let p = |f: &str| self.root.join(f);
        // PNGs hold 8-bit sRGB, so color reloads are quantized; depth and masks are exact
        Ok(CaseData {
            name: e.name.clone(),
            rig: e.rig,
            input_l: load_color(&p(&e.files.input_l))?,
            input_r: load_color(&p(&e.files.input_r))?,
            eye_l_gt: load_color(&p(&e.files.eye_l_gt))?,
            eye_r_gt: load_color(&p(&e.files.eye_r_gt))?,
            input_l_depth: load_pfm(&p(&e.files.input_l_depth))?,
            input_r_depth: load_pfm(&p(&e.files.input_r_depth))?,
            disocc_l: load_mask(&p(&e.files.disocc_l))?,
            disocc_r: load_mask(&p(&e.files.disocc_r))?,
        })
    }
}
