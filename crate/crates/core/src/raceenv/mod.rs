//! The racing MDP: observations, reward, resets and vectorized stepping.
//!
//! An episode starts from a perturbed entry of the [`InitialStateBuffer`]
//! with freshly randomized dynamics and gate positions. Each step applies a
//! normalized collective-thrust and body-rate command for one control
//! period, checks for crashes and gate passes, and returns the reward terms.

mod buffer;
mod env;
mod log;
mod reward;
mod vec_env;

pub use buffer::{seed_entry, BufferEntry, InitialStateBuffer};
pub use env::{
    body_pose, DoneReason, EnvConfig, EpisodeSummary, FullSimState, Observation, ObservationMode, PassEvent, RaceEnv,
    StepResult, HISTORY_DIM, HISTORY_LEN, STATE_DIM,
};
pub use log::{EpisodeLog, LogRow};
pub use reward::{camera_angle, reward, RewardBreakdown, RewardConfig, RewardInputs};
pub use vec_env::VecEnv;

#[cfg(test)]
mod tests;
