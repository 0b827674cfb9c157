//! Row-aligning rectification of a calibrated stereo pair.
//!
//! Both rectified cameras keep their optical centers and share one rotation
//! whose x axis runs along the baseline, so corresponding points differ only
//! in column. Remap tables give, per rectified pixel, the source position in
//! the original image and can be reused across frames.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{ImagePlane, PixelCoord};
use crate::math::{Mat3, Vec3};
use crate::raster::sample_bilinear;
use crate::rig::{Intrinsics, PinholeCamera, Pose, RigModel};

/// Per-pixel source coordinates for resampling into a rectified view.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapTable {
    width: usize,
    height: usize,
    coords: Vec<PixelCoord>,
}

impl RemapTable {
    pub fn identity(width: usize, height: usize) -> Self {
        let mut coords = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                coords.push(PixelCoord::new(x as f64, y as f64));
            }
        }
        Self { width, height, coords }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn source(&self, x: usize, y: usize) -> PixelCoord {
        self.coords[y * self.width + x]
    }

    pub fn is_identity(&self) -> bool {
        self.coords
            .iter()
            .enumerate()
            .all(|(i, c)| c.x == (i % self.width) as f64 && c.y == (i / self.width) as f64)
    }

    /// Bilinear resampling of `img` through the table (clamp-to-edge).
    pub fn apply(&self, img: &ImagePlane) -> ImagePlane {
        if self.is_identity() && img.width() == self.width && img.height() == self.height {
            return img.clone();
        }
        let ch = img.channels();
        let mut data = Vec::with_capacity(self.width * self.height * ch);
        for c in &self.coords {
            for k in 0..ch {
                data.push(sample_bilinear(img, c.x, c.y, k));
            }
        }
        ImagePlane::new(self.width, self.height, ch, data).expect("remap output shape")
    }
}

#[derive(Debug, Clone)]
pub struct RectifiedPair {
    pub left: ImagePlane,
    pub right: ImagePlane,
    /// Rig with the input cameras replaced by their rectified versions.
    pub rig: RigModel,
    pub left_map: RemapTable,
    pub right_map: RemapTable,
}

/// Rectified versions of the rig's two input cameras.
pub fn rectified_cameras(rig: &RigModel) -> Result<(PinholeCamera, PinholeCamera)> {
    let (l, r) = (&rig.cam_left, &rig.cam_right);
    let cl = l.center();
    let cr = r.center();
    let base = cr - cl;
    if base.norm() < 1e-12 {
        bail!(Config, "cannot rectify a rig with zero baseline");
    }
    let x_axis = base.normalized();
    let z_mean = l.pose.rotation.row(2) + r.pose.rotation.row(2);
    let y_dir = z_mean.cross(x_axis);
    if y_dir.norm() < 1e-9 {
        bail!(Config, "baseline is parallel to the viewing direction");
    }
    let y_axis = y_dir.normalized();
    let z_axis = x_axis.cross(y_axis);
    let rot = Mat3::from_rows(x_axis, y_axis, z_axis);
    let k = l.intrinsics;
    let k_new = Intrinsics {
        fx: 0.5 * (l.intrinsics.fx + r.intrinsics.fx),
        fy: 0.5 * (l.intrinsics.fy + r.intrinsics.fy),
        ..k
    };
    Ok((
        PinholeCamera::new(k_new, Pose::looking_from(cl, rot))?,
        PinholeCamera::new(k_new, Pose::looking_from(cr, rot))?,
    ))
}

fn remap_for(original: &PinholeCamera, rectified: &PinholeCamera) -> RemapTable {
    let k = &rectified.intrinsics;
    // rectified ray -> world -> original camera frame
    let rot = original.pose.rotation * rectified.pose.rotation.transpose();
    let same_k = original.intrinsics == rectified.intrinsics;
    if same_k && rot.max_abs_diff(&Mat3::IDENTITY) < 1e-12 {
        return RemapTable::identity(k.width, k.height);
    }
    let mut coords = Vec::with_capacity(k.width * k.height);
    for y in 0..k.height {
        for x in 0..k.width {
            let ray = rectified.pixel_ray(PixelCoord::new(x as f64, y as f64));
            let p = rot * ray;
            let o = &original.intrinsics;
            // points behind the original camera sample nothing useful; clamp
            let z = if p.z > 1e-12 { p.z } else { 1e-12 };
            coords.push(PixelCoord::new(o.fx * p.x / z + o.cx, o.fy * p.y / z + o.cy));
        }
    }
    RemapTable { width: k.width, height: k.height, coords }
}

/// Rectifies a stereo pair of images taken by `rig`'s input cameras.
pub fn rectify_pair(left: &ImagePlane, right: &ImagePlane, rig: &RigModel) -> Result<RectifiedPair> {
    for (img, cam, side) in [(left, &rig.cam_left, "left"), (right, &rig.cam_right, "right")] {
        if img.width() != cam.width() || img.height() != cam.height() {
            bail!(
                Shape,
                "{side} image is {}x{} but its camera expects {}x{}",
                img.width(),
                img.height(),
                cam.width(),
                cam.height()
            );
        }
    }
    let (rl, rr) = rectified_cameras(rig)?;
    let left_map = remap_for(&rig.cam_left, &rl);
    let right_map = remap_for(&rig.cam_right, &rr);
    let mut out_rig = *rig;
    out_rig.cam_left = rl;
    out_rig.cam_right = rr;
    Ok(RectifiedPair {
        left: left_map.apply(left),
        right: right_map.apply(right),
        rig: out_rig,
        left_map,
        right_map,
    })
}

/// Vertical disparity of a world point between the two cameras, in pixels.
pub fn epipolar_error(left: &PinholeCamera, right: &PinholeCamera, p: Vec3) -> Option<f64> {
    let a = left.project_world(p)?;
    let b = right.project_world(p)?;
    Some((a.y - b.y).abs())
}
