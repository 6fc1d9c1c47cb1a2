//! Inner-gate-edge mask rendering.
//!
//! Every inner edge is split into a handful of points that are projected
//! individually, so the polyline follows the lens distortion. Gates are
//! drawn far-to-near. A fraction of the drawn sub-segments is relocated to a
//! random place in the image to mimic detector failures.

use std::time::Instant;

use nalgebra::{Isometry3, Matrix3, Vector2, Vector3};
use rand::Rng;

use super::camera::{project, CameraExtrinsics, CameraIntrinsics, MASK_SIZE};
use super::raster::GateMask;
use crate::track::Gate;

/// Points per inner edge, corners included.
pub const POINTS_PER_EDGE: usize = 5;
/// Share of drawn sub-segments relocated at random.
pub const DEFAULT_CORRUPTION: f64 = 0.10;
/// Line width in mask pixels.
pub const LINE_WIDTH: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct MaskRenderer {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub corruption_frac: f64,
    pub points_per_edge: usize,
    pub line_width: f64,
}

impl Default for MaskRenderer {
    fn default() -> Self {
        Self::new(CameraIntrinsics::default(), CameraExtrinsics::default())
    }
}

/// Counts of the sub-segments that reached the image in one render.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub drawn: usize,
    pub corrupted: usize,
}

impl std::ops::AddAssign for RenderStats {
    fn add_assign(&mut self, rhs: Self) {
        self.drawn += rhs.drawn;
        self.corrupted += rhs.corrupted;
    }
}

impl MaskRenderer {
    pub fn new(intrinsics: CameraIntrinsics, extrinsics: CameraExtrinsics) -> Self {
        Self {
            intrinsics,
            extrinsics,
            corruption_frac: DEFAULT_CORRUPTION,
            points_per_edge: POINTS_PER_EDGE,
            line_width: LINE_WIDTH,
        }
    }

    pub fn with_corruption(mut self, frac: f64) -> Self {
        self.corruption_frac = frac;
        self
    }

    /// World <- camera for a body pose.
    pub fn camera_pose(&self, body: &Isometry3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let r_wb = body.rotation.to_rotation_matrix().into_inner();
        let origin = body.translation.vector + r_wb * self.extrinsics.translation();
        (origin, r_wb * self.extrinsics.rotation())
    }

    /// Projects the edge points of every inner edge of `gate` to mask
    /// coordinates; unprojectable points are `None`.
    pub fn edge_polylines(&self, gate: &Gate, body: &Isometry3<f64>) -> [Vec<Option<Vector2<f64>>>; 4] {
        let (origin, r_wc) = self.camera_pose(body);
        let r_cw = r_wc.transpose();
        let sx = MASK_SIZE as f64 / self.intrinsics.width as f64;
        let sy = MASK_SIZE as f64 / self.intrinsics.height as f64;
        let corners = gate.inner_corners();
        let n = self.points_per_edge.max(2);
        std::array::from_fn(|e| {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            (0..n)
                .map(|k| {
                    let t = k as f64 / (n - 1) as f64;
                    let p_c = r_cw * (a + (b - a) * t - origin);
                    project(&p_c, &self.intrinsics).map(|px| Vector2::new(px.x * sx, px.y * sy))
                })
                .collect()
        })
    }

    pub fn render<R: Rng + ?Sized>(&self, gates: &[Gate], body: &Isometry3<f64>, rng: &mut R) -> GateMask {
        self.render_with_stats(gates, body, rng).0
    }

    pub fn render_with_stats<R: Rng + ?Sized>(
        &self,
        gates: &[Gate],
        body: &Isometry3<f64>,
        rng: &mut R,
    ) -> (GateMask, RenderStats) {
        let mut mask = GateMask::zeros();
        let mut stats = RenderStats::default();
        let (origin, _) = self.camera_pose(body);

        let mut order: Vec<(f64, usize)> = gates
            .iter()
            .enumerate()
            .map(|(i, g)| ((g.center - origin).norm(), i))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let size = MASK_SIZE as f64;
        for (_, gi) in order {
            for line in self.edge_polylines(&gates[gi], body) {
                for pair in line.windows(2) {
                    let (Some(a), Some(b)) = (pair[0], pair[1]) else { continue };
                    if !GateMask::line_touches(&a, &b, self.line_width) {
                        continue;
                    }
                    stats.drawn += 1;
                    if rng.random::<f64>() < self.corruption_frac {
                        stats.corrupted += 1;
                        let half = 0.5 * (b - a).norm();
                        let center = Vector2::new(rng.random_range(0.0..size), rng.random_range(0.0..size));
                        let angle = rng.random_range(0.0..std::f64::consts::TAU);
                        let dir = Vector2::new(angle.cos(), angle.sin()) * half;
                        mask.draw_line(center - dir, center + dir, self.line_width);
                    } else {
                        mask.draw_line(a, b, self.line_width);
                    }
                }
            }
        }
        (mask, stats)
    }
}

/// Free-function form of [`MaskRenderer::render`].
pub fn render_gate_mask<R: Rng + ?Sized>(
    gates: &[Gate],
    body: &Isometry3<f64>,
    extrinsics: &CameraExtrinsics,
    intrinsics: &CameraIntrinsics,
    corruption_frac: f64,
    rng: &mut R,
) -> GateMask {
    MaskRenderer::new(intrinsics.clone(), extrinsics.clone())
        .with_corruption(corruption_frac)
        .render(gates, body, rng)
}

/// Wall-clock statistics of repeated mask renders.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchReport {
    pub mean_us: f64,
    pub p99_us: f64,
    pub iterations: usize,
}

pub fn mask_render_benchmark<R: Rng + ?Sized>(
    renderer: &MaskRenderer,
    gates: &[Gate],
    body: &Isometry3<f64>,
    iterations: usize,
    rng: &mut R,
) -> BenchReport {
    let iterations = iterations.max(100);
    let mut samples = Vec::with_capacity(iterations);
    let mut sink = 0.0f32;
    for _ in 0..iterations {
        let t0 = Instant::now();
        let mask = renderer.render(gates, body, rng);
        samples.push(t0.elapsed().as_secs_f64() * 1e6);
        sink += mask.pixels()[0];
    }
    std::hint::black_box(sink);
    samples.sort_by(f64::total_cmp);
    let mean_us = samples.iter().sum::<f64>() / iterations as f64;
    let p99_us = samples[((iterations as f64 * 0.99).ceil() as usize).min(iterations) - 1];
    BenchReport { mean_us, p99_us, iterations }
}

/// Body pose looking along `heading_deg` from `position`, level.
pub fn level_pose(position: Vector3<f64>, heading_deg: f64) -> Isometry3<f64> {
    Isometry3::new(position, Vector3::z() * heading_deg.to_radians())
}

/// Body pose at `eye` whose camera optical axis points at `target`.
pub fn look_at_pose(eye: Vector3<f64>, target: Vector3<f64>, extrinsics: &CameraExtrinsics) -> Isometry3<f64> {
    let dir = (target - eye).normalize();
    // Body forward tilted down by the camera uptilt so the optical axis hits the target.
    let heading = dir.y.atan2(dir.x);
    let elevation = dir.z.asin();
    let pitch = extrinsics.uptilt_deg.to_radians() - elevation;
    let rot = nalgebra::UnitQuaternion::from_euler_angles(0.0, pitch, heading);
    Isometry3::from_parts(eye.into(), rot)
}
