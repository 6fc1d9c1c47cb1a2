//! Fisheye camera model and gate-edge observation rendering.

mod camera;
mod raster;
mod render;

pub use camera::{project, unproject, CameraExtrinsics, CameraIntrinsics, MASK_SIZE};
pub use raster::GateMask;
pub use render::{
    level_pose, look_at_pose, mask_render_benchmark, render_gate_mask, BenchReport, MaskRenderer, RenderStats,
    DEFAULT_CORRUPTION, LINE_WIDTH, POINTS_PER_EDGE,
};
