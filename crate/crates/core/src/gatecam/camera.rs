//! Double-sphere fisheye camera.
//!
//! A point is projected through two unit spheres whose centers are offset by
//! `xi` along the optical axis, then onto a pinhole image plane shifted by
//! `alpha_cam`. Camera frame: z along the optical axis, x right, y down.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the square policy observation, pixels.
pub const MASK_SIZE: usize = 84;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub xi: f64,
    pub alpha_cam: f64,
    /// Native image width, pixels.
    pub width: u32,
    /// Native image height, pixels.
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 285.0,
            fy: 285.0,
            cx: 420.0,
            cy: 234.0,
            xi: -0.27,
            alpha_cam: 0.57,
            width: 840,
            height: 468,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.xi, self.alpha_cam];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(invalid("intrinsics must be finite"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(invalid("focal lengths must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha_cam) {
            return Err(invalid("alpha_cam must lie in [0, 1]"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid("image size must be positive"));
        }
        Ok(())
    }

    /// Points with `z <= -w * |p|` lie outside the projectable region.
    fn projection_bound(&self) -> f64 {
        let a = self.alpha_cam;
        let w1 = if a <= 0.5 { a / (1.0 - a) } else { (1.0 - a) / a };
        (w1 + self.xi) / (2.0 * w1 * self.xi + self.xi * self.xi + 1.0).sqrt()
    }
}

fn invalid(reason: &str) -> Error {
    Error::InvalidParam { name: "CameraIntrinsics", reason: reason.into() }
}

/// Projects a camera-frame point to native pixel coordinates, or `None`
/// when it falls outside the model's valid region.
pub fn project(point: &Vector3<f64>, intr: &CameraIntrinsics) -> Option<Vector2<f64>> {
    let (x, y, z) = (point.x, point.y, point.z);
    let d1 = point.norm();
    if d1 == 0.0 || !d1.is_finite() {
        return None;
    }
    if z <= -intr.projection_bound() * d1 {
        return None;
    }
    let zs = intr.xi * d1 + z;
    let d2 = (x * x + y * y + zs * zs).sqrt();
    let denom = intr.alpha_cam * d2 + (1.0 - intr.alpha_cam) * zs;
    if denom <= 0.0 {
        return None;
    }
    Some(Vector2::new(intr.fx * x / denom + intr.cx, intr.fy * y / denom + intr.cy))
}

/// Unit viewing ray through a native pixel.
pub fn unproject(pixel: &Vector2<f64>, intr: &CameraIntrinsics) -> Result<Vector3<f64>> {
    let bad = || Error::InvalidPixel { u: pixel.x, v: pixel.y };
    let mx = (pixel.x - intr.cx) / intr.fx;
    let my = (pixel.y - intr.cy) / intr.fy;
    let r2 = mx * mx + my * my;
    let a = intr.alpha_cam;
    if a > 0.5 && r2 > 1.0 / (2.0 * a - 1.0) {
        return Err(bad());
    }
    let mz = (1.0 - a * a * r2) / (a * (1.0 - (2.0 * a - 1.0) * r2).sqrt() + 1.0 - a);
    let disc = mz * mz + (1.0 - intr.xi * intr.xi) * r2;
    if disc < 0.0 || !mz.is_finite() {
        return Err(bad());
    }
    let scale = (mz * intr.xi + disc.sqrt()) / (mz * mz + r2);
    let ray = Vector3::new(scale * mx, scale * my, scale * mz - intr.xi);
    let norm = ray.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(bad());
    }
    let ray = ray / norm;
    if ray.z <= -intr.projection_bound() {
        return Err(bad());
    }
    Ok(ray)
}

/// Rigid mount of the camera on the body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraExtrinsics {
    /// Upward tilt of the optical axis about the body y axis, degrees.
    pub uptilt_deg: f64,
    /// Camera origin in the body frame, m.
    pub translation: [f64; 3],
}

impl Default for CameraExtrinsics {
    fn default() -> Self {
        Self { uptilt_deg: 30.0, translation: [0.0; 3] }
    }
}

impl CameraExtrinsics {
    pub fn level() -> Self {
        Self { uptilt_deg: 0.0, translation: [0.0; 3] }
    }

    /// Rotation body <- camera. Columns are the camera axes in body frame.
    pub fn rotation(&self) -> Matrix3<f64> {
        let t = self.uptilt_deg.to_radians();
        let (s, c) = t.sin_cos();
        // Optical axis pitched up from body x; image y points down.
        let z_cam = Vector3::new(c, 0.0, s);
        let x_cam = Vector3::new(0.0, -1.0, 0.0);
        let y_cam = z_cam.cross(&x_cam);
        Matrix3::from_columns(&[x_cam, y_cam, z_cam])
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    /// Optical axis expressed in the body frame.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation().column(2).into_owned()
    }
}
