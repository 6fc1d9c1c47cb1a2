use std::path::Path;

use serde::Serialize;

use super::env::{RaceEnv, StepResult};
use crate::error::Result;

/// One row of an episode log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub r_prog: f64,
    pub r_perc: f64,
    pub r_pass: f64,
    pub r_cmd: f64,
    pub r_crash: f64,
    pub event: String,
}

/// Per-step trajectory and reward log of one episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeLog {
    pub rows: Vec<LogRow>,
}

impl EpisodeLog {
    /// Records the state of `env` right after `result` was produced by
    /// applying `action`.
    pub fn record(&mut self, env: &RaceEnv, action: [f64; 4], result: &StepResult) {
        let s = env.state();
        let q = s.orientation.quaternion();
        let b = &result.breakdown;
        let mut event = Vec::new();
        if let Some(p) = &result.pass {
            event.push(format!("pass:{}", p.gate));
        }
        if let Some(r) = result.done_reason {
            event.push(r.as_str().to_string());
        }
        self.rows.push(LogRow {
            t: env.time(),
            px: s.position.x,
            py: s.position.y,
            pz: s.position.z,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            vx: s.velocity.x,
            vy: s.velocity.y,
            vz: s.velocity.z,
            wx: s.body_rates.x,
            wy: s.body_rates.y,
            wz: s.body_rates.z,
            a0: action[0],
            a1: action[1],
            a2: action[2],
            a3: action[3],
            r_prog: b.progress,
            r_perc: b.perception,
            r_pass: b.pass,
            r_cmd: b.command,
            r_crash: b.crash,
            event: event.join(";"),
        });
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
