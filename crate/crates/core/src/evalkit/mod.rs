//! Policy evaluation: success rate, mean gate-passing error and lap time.
//!
//! A rollout succeeds when it passes every gate in order for the required
//! number of laps without crashing before the step limit. MGE averages the
//! in-plane crossing offset over all passes. Lap time is reported only
//! when at least one rollout succeeds.

mod controllers;
mod metrics;
mod run;

pub use controllers::{AgentController, ConstantAction, Controller, Replay, ScriptedPilot};
pub use metrics::{center_line, kinematic_rollout, lap_times, mean, required_passes, sample_path, EvalReport, Outcome, RolloutRecord};
pub use run::{
    displace_gates, displacement_grid, eval_env_config, evaluate, record_actions, run_rollout, sensitivity_sweep, start_state,
    write_report_csv, write_summary_csv, write_sweep_csv, Axis, EvalConfig, SweepRow,
};

#[cfg(test)]
mod tests;
