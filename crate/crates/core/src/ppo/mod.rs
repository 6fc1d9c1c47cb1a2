//! Proximal policy optimization with generalized advantage estimation.
//!
//! [`train`] collects batches from a [`VecEnv`](crate::raceenv::VecEnv),
//! computes advantages per environment and runs clipped-surrogate Adam
//! updates. Gradients are evaluated in fixed-size shards and reduced in a
//! fixed order, so a run is reproducible for any number of worker threads.

mod adam;
mod agent;
mod gae;
mod train;
mod update;

pub use adam::{Adam, AdamConfig};
pub use agent::{bytes_to_input, mask_bytes, Agent, ObsBatch, FORWARD_SHARD};
pub use gae::{compute_gae, normalize};
pub use train::{train, CurveRow, TrainOptions, TrainOutcome, CURVE_COLUMNS, EPISODE_WINDOW, FINAL_CHECKPOINT};
pub use update::{minibatch_gradient, ppo_update, total_loss, PpoConfig, UpdateBatch, UpdateStats};

#[cfg(test)]
mod tests;
