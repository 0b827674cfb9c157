//! Pinhole cameras, the passthrough rig, reprojection between views, and the
//! camera-placement disocclusion analysis.
//!
//! Conventions: camera frames are x right, y down, z forward. A pose maps
//! world points into the camera frame, `p_cam = R·p_world + t`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::image::PixelCoord;
use crate::math::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Square pixels with the principal point at the image center.
    pub fn centered(width: usize, height: usize, focal_px: f64) -> Self {
        Self {
            fx: focal_px,
            fy: focal_px,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        }
    }

    /// Focal length giving a horizontal field of view of `fov_rad`.
    pub fn from_horizontal_fov(width: usize, height: usize, fov_rad: f64) -> Self {
        Self::centered(width, height, width as f64 / 2.0 / libm::tan(fov_rad / 2.0))
    }
}

/// Rigid world-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { rotation: Mat3::IDENTITY, translation: Vec3::ZERO };

    /// Camera with optical center `center` (world) and world-to-camera
    /// rotation `rotation`.
    pub fn looking_from(center: Vec3, rotation: Mat3) -> Pose {
        Pose { rotation, translation: -(rotation * center) }
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl PinholeCamera {
    pub fn new(intrinsics: Intrinsics, pose: Pose) -> Result<Self> {
        let cam = Self { intrinsics, pose };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0) {
            bail!(Config, "focal lengths must be positive (fx={}, fy={})", k.fx, k.fy);
        }
        if k.width == 0 || k.height == 0 {
            bail!(Config, "camera resolution must be non-zero");
        }
        let err = self.pose.rotation.orthonormality_error();
        if err > 1e-9 {
            bail!(Config, "rotation is not orthonormal (|RᵀR − I| = {err:e})");
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn center(&self) -> Vec3 {
        self.pose.center()
    }

    /// Unit-depth ray (`z = 1`) through a pixel, in the camera frame.
    pub fn pixel_ray(&self, p: PixelCoord) -> Vec3 {
        let k = &self.intrinsics;
        Vec3::new((p.x - k.cx) / k.fx, (p.y - k.cy) / k.fy, 1.0)
    }

    /// World direction of the ray through a pixel (not normalized).
    pub fn world_ray(&self, p: PixelCoord) -> Vec3 {
        self.pose.rotation.transpose() * self.pixel_ray(p)
    }

    /// Projects a camera-frame point; `None` when it is not in front.
    pub fn project_cam(&self, p: Vec3) -> Option<PixelCoord> {
        if p.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some(PixelCoord::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
    }

    pub fn project_world(&self, p: Vec3) -> Option<PixelCoord> {
        self.project_cam(self.pose.apply(p))
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x > -0.5 && p.y > -0.5 && p.x < self.width() as f64 - 0.5 && p.y < self.height() as f64 - 0.5
    }
}

/// Reprojects pixels with known inverse depth from one camera into another.
///
/// The relative transform is computed once, so mapping a whole image costs a
/// handful of flops per pixel.
#[derive(Debug, Clone, Copy)]
pub struct Reprojector {
    src: Intrinsics,
    dst: Intrinsics,
    rel_rotation: Mat3,
    rel_translation: Vec3,
    identity: bool,
}

impl Reprojector {
    pub fn new(src: &PinholeCamera, dst: &PinholeCamera) -> Self {
        let identity = src == dst;
        let (rel_rotation, rel_translation) = if identity {
            (Mat3::IDENTITY, Vec3::ZERO)
        } else {
            let r = dst.pose.rotation * src.pose.rotation.transpose();
            (r, dst.pose.translation - r * src.pose.translation)
        };
        Self { src: src.intrinsics, dst: dst.intrinsics, rel_rotation, rel_translation, identity }
    }

    /// Target position of source pixel `(x, y)` with inverse depth
    /// `inv_depth` (1/m, `0` = infinity). `None` if the point ends up on or
    /// behind the target image plane.
    #[inline]
    pub fn map(&self, x: f64, y: f64, inv_depth: f64) -> Option<PixelCoord> {
        if self.identity {
            return Some(PixelCoord::new(x, y));
        }
        let ray = Vec3::new((x - self.src.cx) / self.src.fx, (y - self.src.cy) / self.src.fy, 1.0);
        // point scaled by inv_depth; the scale cancels in the projection
        let p = self.rel_rotation * ray + self.rel_translation * inv_depth;
        if p.z <= 0.0 {
            return None;
        }
        Some(PixelCoord::new(
            self.dst.fx * p.x / p.z + self.dst.cx,
            self.dst.fy * p.y / p.z + self.dst.cy,
        ))
    }
}

/// Maps `coord` (with inverse depth `inv_depth`) from `src` into `dst`.
/// Returns `None` for points behind the destination camera.
pub fn reproject(coord: PixelCoord, inv_depth: f64, src: &PinholeCamera, dst: &PinholeCamera) -> Option<PixelCoord> {
    Reprojector::new(src, dst).map(coord.x, coord.y, inv_depth)
}

/// Near occluder and background depths (meters from the camera plane).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneDepthPair {
    pub z_near: f64,
    pub z_far: f64,
}

impl SceneDepthPair {
    pub fn new(z_near: f64, z_far: f64) -> Result<Self> {
        if !(z_near > 0.0 && z_near < z_far) {
            bail!(Argument, "depth pair needs 0 < z_near < z_far (got {z_near}, {z_far})");
        }
        Ok(Self { z_near, z_far })
    }
}

/// Geometric parameters of a symmetric passthrough headset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigParams {
    pub width: usize,
    pub height: usize,
    /// Focal length of the input cameras and eye views in pixels.
    pub focal_px: f64,
    /// Camera-to-eye distance along the optical axis, `t`.
    pub hmd_thickness_m: f64,
    /// Outward horizontal offset of each camera from its eye, `x`.
    pub camera_offset_m: f64,
    /// Interpupillary distance, `e`.
    pub ipd_m: f64,
    /// Full angle `φ` of the central cone in which disocclusion should vanish.
    pub interest_angle_rad: f64,
    /// Focal length of the eye views when it differs from the cameras'. A
    /// longer eye focal length keeps the eye frusta inside the camera
    /// frusta beyond a minimum depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye_focal_px: Option<f64>,
}

impl RigParams {
    /// Prototype headset: 1280×720 at 90° horizontal FOV, 10 cm camera
    /// baseline, 9.3 cm camera-to-eye distance, 6 cm IPD, φ = 25°.
    pub fn prototype() -> Self {
        let k = Intrinsics::from_horizontal_fov(1280, 720, core::f64::consts::FRAC_PI_2);
        Self {
            width: 1280,
            height: 720,
            focal_px: k.fx,
            hmd_thickness_m: 0.093,
            camera_offset_m: 0.02,
            ipd_m: 0.06,
            interest_angle_rad: 25f64.to_radians(),
            eye_focal_px: None,
        }
    }

    pub fn baseline_m(&self) -> f64 {
        self.ipd_m + 2.0 * self.camera_offset_m
    }

    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        let scale = width as f64 / self.width as f64;
        self.focal_px *= scale;
        self.eye_focal_px = self.eye_focal_px.map(|f| f * scale);
        self.width = width;
        self.height = height;
        self
    }
}

/// Two forward-facing input cameras and the two target eye viewpoints.
///
/// World origin is the rig center on the camera plane; eyes sit
/// `hmd_thickness` behind it (negative z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigModel {
    pub cam_left: PinholeCamera,
    pub cam_right: PinholeCamera,
    pub eye_left: PinholeCamera,
    pub eye_right: PinholeCamera,
    pub hmd_thickness: f64,
    pub camera_offset: f64,
    pub ipd: f64,
    pub interest_angle: f64,
}

impl RigModel {
    pub fn symmetric(p: &RigParams) -> Result<Self> {
        let k = Intrinsics::centered(p.width, p.height, p.focal_px);
        let k_eye = Intrinsics::centered(p.width, p.height, p.eye_focal_px.unwrap_or(p.focal_px));
        let half_base = p.ipd_m / 2.0 + p.camera_offset_m;
        let at = |k: Intrinsics, x: f64, z: f64| PinholeCamera::new(k, Pose::looking_from(Vec3::new(x, 0.0, z), Mat3::IDENTITY));
        let rig = Self {
            cam_left: at(k, -half_base, 0.0)?,
            cam_right: at(k, half_base, 0.0)?,
            eye_left: at(k_eye, -p.ipd_m / 2.0, -p.hmd_thickness_m)?,
            eye_right: at(k_eye, p.ipd_m / 2.0, -p.hmd_thickness_m)?,
            hmd_thickness: p.hmd_thickness_m,
            camera_offset: p.camera_offset_m,
            ipd: p.ipd_m,
            interest_angle: p.interest_angle_rad,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn baseline(&self) -> f64 {
        (self.cam_right.center() - self.cam_left.center()).norm()
    }

    pub fn validate(&self) -> Result<()> {
        for c in [&self.cam_left, &self.cam_right, &self.eye_left, &self.eye_right] {
            c.validate()?;
        }
        if !(self.hmd_thickness >= 0.0) {
            bail!(Config, "hmd thickness must be ≥ 0");
        }
        if !(0.0..core::f64::consts::PI).contains(&self.interest_angle) {
            bail!(Config, "interest angle must lie in [0, π)");
        }
        if !(self.ipd > 0.0) {
            bail!(Config, "ipd must be positive");
        }
        let (cl, cr) = (self.cam_left.center(), self.cam_right.center());
        let (el, er) = (self.eye_left.center(), self.eye_right.center());
        let tol = 1e-9;
        if (cl.y - el.y).abs() > tol || (cr.y - er.y).abs() > tol || (cl.y - cr.y).abs() > tol {
            bail!(Config, "cameras and eyes must share one horizontal plane");
        }
        let mid_c = (cl + cr) * 0.5;
        let mid_e = (el + er) * 0.5;
        if (mid_c.x - mid_e.x).abs() > tol {
            bail!(Config, "cameras and eyes must be symmetric about the rig center");
        }
        let expect = self.ipd + 2.0 * self.camera_offset;
        if (self.baseline() - expect).abs() > 1e-9 {
            bail!(Config, "camera baseline {} disagrees with e + 2x = {}", self.baseline(), expect);
        }
        Ok(())
    }

    /// True when both input cameras share a rotation and differ only along
    /// their common x axis.
    pub fn inputs_rectified(&self) -> bool {
        let (l, r) = (&self.cam_left, &self.cam_right);
        if l.pose.rotation.max_abs_diff(&r.pose.rotation) > 1e-12 || l.intrinsics != r.intrinsics {
            return false;
        }
        let d = l.pose.rotation * (r.center() - l.center());
        d.y.abs() < 1e-12 && d.z.abs() < 1e-12 && d.x > 0.0
    }
}

/// Width (meters, at the background plane) of the region seen by an eye but
/// hidden from its camera, for a near occluder in front of a background.
pub fn disocclusion_width(rig: &RigModel, depths: &SceneDepthPair) -> f64 {
    disocclusion_width_raw(rig.hmd_thickness, rig.camera_offset, rig.interest_angle, depths.z_near, depths.z_far)
}

/// `max(0, t·tan(φ/2) − x) · (z_far/z_near − 1)`.
pub fn disocclusion_width_raw(t: f64, x: f64, phi: f64, z_near: f64, z_far: f64) -> f64 {
    (t * libm::tan(phi / 2.0) - x).max(0.0) * (z_far / z_near - 1.0)
}

/// Smallest camera baseline that removes disocclusion within the φ cone:
/// `e + 2·t·tan(φ/2)`.
pub fn minimal_baseline(t: f64, phi: f64, e: f64) -> f64 {
    e + 2.0 * t * libm::tan(phi / 2.0)
}

/// Cartesian grid of headset designs and scene depth pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignGrid {
    pub t_m: Vec<f64>,
    pub x_m: Vec<f64>,
    pub e_m: Vec<f64>,
    pub phi_rad: Vec<f64>,
    pub depths: Vec<SceneDepthPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_m: f64,
    pub x_m: f64,
    pub e_m: f64,
    pub phi_rad: f64,
    pub z_near_m: f64,
    pub z_far_m: f64,
    pub beta_m: f64,
}

/// Evaluates the disocclusion width at every grid point. Rows are ordered
/// with `t` outermost, then `x`, `e`, `φ` and the depth pair innermost.
pub fn sweep_design_space(grid: &DesignGrid) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &t in &grid.t_m {
        for &x in &grid.x_m {
            for &e in &grid.e_m {
                for &phi in &grid.phi_rad {
                    for d in &grid.depths {
                        rows.push(SweepRow {
                            t_m: t,
                            x_m: x,
                            e_m: e,
                            phi_rad: phi,
                            z_near_m: d.z_near,
                            z_far_m: d.z_far,
                            beta_m: disocclusion_width_raw(t, x, phi, d.z_near, d.z_far),
                        });
                    }
                }
            }
        }
    }
    rows
}
