use std::path::Path;
use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::controllers::Controller;
use super::metrics::{lap_times, required_passes, EvalReport, Outcome, RolloutRecord};
use crate::error::{Error, Result};
use crate::quadsim::{QuadState, RandomizationSpec};
use crate::raceenv::{EnvConfig, RaceEnv};
use crate::track::Track;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_rollouts: usize,
    pub steps: usize,
    /// Laps to finish on cyclic tracks; acyclic tracks are flown once.
    pub laps: u64,
    /// Start-position half-width per axis, m.
    pub start_jitter: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { n_rollouts: 64, steps: 1000, laps: 3, start_jitter: 0.1, seed: 0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rollouts == 0 || self.steps == 0 || self.laps == 0 {
            return Err(Error::InvalidParam { name: "eval", reason: "rollouts, steps and laps must be positive".into() });
        }
        if !(self.start_jitter >= 0.0 && self.start_jitter.is_finite()) {
            return Err(Error::InvalidParam { name: "start_jitter", reason: "must be finite and >= 0".into() });
        }
        Ok(())
    }
}

/// Nominal dynamics, no randomization, episode length from `eval`.
pub fn eval_env_config(base: &EnvConfig, eval: &EvalConfig) -> EnvConfig {
    EnvConfig { randomization: RandomizationSpec::none(), max_steps: eval.steps, ..base.clone() }
}

fn rollout_rng(seed: u64, rollout: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rollout as u64) << 8) | purpose);
    rng
}

/// Start state of rollout `i`: hovering at the start pose with jitter.
pub fn start_state(track: &Track, env: &EnvConfig, eval: &EvalConfig, i: usize) -> QuadState {
    let mut rng = rollout_rng(eval.seed, i, 0);
    let j = eval.start_jitter;
    let mut jitter = || j * rng.random_range(-1.0..=1.0);
    let offset = Vector3::new(jitter(), jitter(), jitter());
    let mut s = QuadState::hovering(track.start.position + offset, &env.params);
    s.orientation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), track.start.yaw_deg.to_radians());
    s
}

/// Runs one closed-loop rollout on `track`.
pub fn run_rollout<C: Controller>(
    ctrl: &mut C,
    track: Arc<Track>,
    env_cfg: Arc<EnvConfig>,
    eval: &EvalConfig,
    i: usize,
) -> Result<RolloutRecord> {
    let need = required_passes(&track, eval.laps);
    let n_gates = track.n_gates();
    let state = start_state(&track, &env_cfg, eval, i);
    let params = env_cfg.params.clone();
    let mut env = RaceEnv::new(env_cfg, track, eval.seed, ((i as u64) << 8) | 1)?;
    let mut obs = env.reset_to(state, 0, params);
    let mut passes = Vec::new();
    for step in 1..=eval.steps {
        let a = ctrl.act(&env, &obs)?;
        let r = env.step(a)?;
        if let Some(p) = r.pass {
            passes.push(p);
            if passes.len() as u64 == need {
                let lap_times = lap_times(&passes, n_gates);
                return Ok(RolloutRecord { outcome: Outcome::Success, passes, lap_times, steps: step });
            }
        }
        if let Some(reason) = r.done_reason {
            let outcome = if reason.is_crash() { Outcome::Crash } else { Outcome::Timeout };
            return Ok(RolloutRecord { outcome, passes, lap_times: Vec::new(), steps: step });
        }
        obs = r.obs;
    }
    Ok(RolloutRecord { outcome: Outcome::Timeout, passes, lap_times: Vec::new(), steps: eval.steps })
}

/// Evaluates `eval.n_rollouts` independent rollouts, each with a fresh
/// controller from `make`.
pub fn evaluate<C, F>(make: F, track: &Track, env: &EnvConfig, eval: &EvalConfig) -> Result<EvalReport>
where
    C: Controller,
    F: Fn() -> C + Sync,
{
    evaluate_with(make, track, env, eval, |_, t| t.clone())
}

fn evaluate_with<C, F, T>(make: F, track: &Track, env: &EnvConfig, eval: &EvalConfig, track_for: T) -> Result<EvalReport>
where
    C: Controller,
    F: Fn() -> C + Sync,
    T: Fn(usize, &Track) -> Track + Sync,
{
    eval.validate()?;
    track.validate()?;
    let cfg = Arc::new(eval_env_config(env, eval));
    let records = (0..eval.n_rollouts)
        .into_par_iter()
        .map(|i| run_rollout(&mut make(), Arc::new(track_for(i, track)), cfg.clone(), eval, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_records(records))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn unit(self) -> Vector3<f64> {
        match self {
            Self::X => Vector3::x(),
            Self::Y => Vector3::y(),
            Self::Z => Vector3::z(),
        }
    }
}

/// One-sided gate displacement: every gate moves by `u * magnitude` along
/// `sign * axis` with `u` uniform in `[0, 1]`, drawn per rollout and gate
/// independently of the magnitude.
pub fn displace_gates(track: &Track, axis: Axis, sign: f64, magnitude: f64, seed: u64, rollout: usize) -> Track {
    let mut rng = rollout_rng(seed, rollout, 2);
    let mut out = track.clone();
    for g in &mut out.gates {
        let u: f64 = rng.random_range(0.0..=1.0);
        g.center += axis.unit() * (sign * u * magnitude);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub sign: f64,
    pub displacement: f64,
    pub sr: f64,
    pub mge: Option<f64>,
    pub lt: Option<f64>,
}

/// Displacement grid up to `max` in `steps` equal increments, zero included.
pub fn displacement_grid(max: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| max * k as f64 / steps.max(1) as f64).collect()
}

/// Evaluates every axis and sign of the grid with common random numbers.
pub fn sensitivity_sweep<C, F>(make: F, track: &Track, env: &EnvConfig, eval: &EvalConfig, grid: &[f64]) -> Result<Vec<SweepRow>>
where
    C: Controller,
    F: Fn() -> C + Sync,
{
    let mut rows = Vec::new();
    for axis in Axis::ALL {
        for sign in [1.0, -1.0] {
            for &d in grid {
                let report = evaluate_with(&make, track, env, eval, |i, t| displace_gates(t, axis, sign, d, eval.seed, i))?;
                rows.push(SweepRow { axis, sign, displacement: d, sr: report.sr, mge: report.mge, lt: report.lt });
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RolloutCsv {
    rollout: usize,
    outcome: &'static str,
    steps: usize,
    gates_passed: usize,
    mean_offset: Option<f64>,
    lap_times: String,
}

/// Per-rollout records as CSV.
pub fn write_report_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, r) in report.rollouts.iter().enumerate() {
        let offs: Vec<f64> = r.passes.iter().map(|p| p.offset).collect();
        w.serialize(RolloutCsv {
            rollout: i,
            outcome: r.outcome.as_str(),
            steps: r.steps,
            gates_passed: r.passes.len(),
            mean_offset: (!offs.is_empty()).then(|| offs.iter().sum::<f64>() / offs.len() as f64),
            lap_times: r.lap_times.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>().join(";"),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryCsv {
    sr: f64,
    mge: Option<f64>,
    lt: Option<f64>,
    crash_pct: f64,
    timeout_pct: f64,
    rollouts: usize,
}

pub fn write_summary_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.serialize(SummaryCsv {
        sr: report.sr,
        mge: report.mge,
        lt: report.lt,
        crash_pct: report.crash_pct,
        timeout_pct: report.timeout_pct,
        rollouts: report.rollouts.len(),
    })?;
    w.flush()?;
    Ok(())
}

/// Records the pilot's actions while it flies `steps` control periods from
/// the nominal start, without any environment termination.
pub fn record_actions(
    pilot: &mut super::controllers::ScriptedPilot,
    track: &Track,
    env: &EnvConfig,
    steps: usize,
) -> Result<Vec<[f64; 4]>> {
    let eval = EvalConfig { start_jitter: 0.0, ..EvalConfig::default() };
    let mut state = start_state(track, env, &eval, 0);
    let h = env.dt / env.substeps as f64;
    let mut actions = Vec::with_capacity(steps);
    for _ in 0..steps {
        let a = pilot.command(&state);
        let cmd = crate::quadsim::Action::from_normalized(a, &env.params);
        for _ in 0..env.substeps {
            state = crate::quadsim::step(&state, &cmd, &env.params, &env.gains, h)?;
        }
        actions.push(a);
    }
    Ok(actions)
}
