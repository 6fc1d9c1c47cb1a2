//! Per-step reward.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Progress weight.
    pub lambda1: f64,
    /// Perception weight.
    pub lambda2: f64,
    /// Command magnitude weight.
    pub lambda3: f64,
    /// Command rate weight.
    pub lambda4: f64,
    pub pass_base: f64,
    pub crash_penalty: f64,
    /// Bonus for passing the last gate of an acyclic track.
    pub terminal_reward_acyclic: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.025,
            lambda3: 0.0005,
            lambda4: 0.0002,
            pass_base: 1.0,
            crash_penalty: 4.0,
            terminal_reward_acyclic: 10.0,
        }
    }
}

/// The five reward terms. `command` and `crash` are magnitudes that enter
/// the total with a minus sign.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardBreakdown {
    pub progress: f64,
    pub perception: f64,
    pub pass: f64,
    pub command: f64,
    pub crash: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.progress + self.perception + self.pass - self.command - self.crash
    }
}

/// Everything the reward depends on for one transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardInputs {
    /// Distance to the targeted gate center before the step.
    pub prev_distance: f64,
    /// Distance to the same gate center after the step.
    pub curr_distance: f64,
    /// Angle between the optical axis and the direction to the next gate, rad.
    pub camera_angle: f64,
    /// Normalized action applied in this step.
    pub action: [f64; 4],
    /// Normalized action of the previous step.
    pub prev_action: [f64; 4],
    /// In-plane crossing offset when a gate was passed.
    pub pass_offset: Option<f64>,
    pub crash: bool,
}

pub fn reward(inputs: &RewardInputs, cfg: &RewardConfig) -> RewardBreakdown {
    let norm = |v: [f64; 4]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let delta: [f64; 4] = std::array::from_fn(|i| inputs.action[i] - inputs.prev_action[i]);
    let rate = norm(delta);
    RewardBreakdown {
        progress: cfg.lambda1 * (inputs.prev_distance - inputs.curr_distance),
        perception: cfg.lambda2 * (-inputs.camera_angle.powi(4)).exp(),
        pass: inputs.pass_offset.map_or(0.0, |d| cfg.pass_base - d),
        command: cfg.lambda3 * norm(inputs.action) + cfg.lambda4 * rate * rate,
        crash: if inputs.crash { cfg.crash_penalty } else { 0.0 },
    }
}

/// Angle between a viewing axis and the direction to a target, rad.
pub fn camera_angle(axis: &Vector3<f64>, to_target: &Vector3<f64>) -> f64 {
    let denom = axis.norm() * to_target.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (axis.dot(to_target) / denom).clamp(-1.0, 1.0).acos()
}
