use std::fmt;

use nalgebra::Vector3;
use serde::Serialize;

use crate::raceenv::PassEvent;
use crate::track::{detect_gate_collision, detect_gate_pass, Track, DRONE_RADIUS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Crash,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Success => "success",
            Self::Crash => "crash",
            Self::Timeout => "timeout",
        }
    }
}

/// Everything measured in one evaluation rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutRecord {
    pub outcome: Outcome,
    pub passes: Vec<PassEvent>,
    /// Durations of completed laps, s.
    pub lap_times: Vec<f64>,
    pub steps: usize,
}

/// Gate passes needed to finish: every gate once on acyclic tracks, every
/// gate `laps` times otherwise.
pub fn required_passes(track: &Track, laps: u64) -> u64 {
    let n = track.n_gates() as u64;
    if track.cyclic {
        laps * n
    } else {
        n
    }
}

/// Lap `k` lasts from the completion of the gate sequence `k - 1` times (or
/// the episode start) to its completion `k` times.
pub fn lap_times(passes: &[PassEvent], n_gates: usize) -> Vec<f64> {
    let mut laps = Vec::new();
    let mut last = 0.0;
    for (i, p) in passes.iter().enumerate() {
        if (i + 1) % n_gates == 0 {
            laps.push(p.time - last);
            last = p.time;
        }
    }
    laps
}

/// Mean of `xs` rounded from the exact sum: compensated summation, then a
/// division whose remainder is recovered with a fused multiply-add.
pub fn mean(xs: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = s + x;
        let b = t - s;
        c += (s - (t - b)) + (x - b);
        s = t;
    }
    let n = xs.len() as f64;
    let q = s / n;
    let r = (-q).mul_add(n, s);
    q + (r + c) / n
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Successful rollouts, percent.
    pub sr: f64,
    /// Mean in-plane offset over all gate passes, m; absent without passes.
    pub mge: Option<f64>,
    /// Mean lap time over the laps of successful rollouts, s; absent when
    /// no rollout succeeds.
    pub lt: Option<f64>,
    pub crash_pct: f64,
    pub timeout_pct: f64,
    pub rollouts: Vec<RolloutRecord>,
}

impl EvalReport {
    pub fn from_records(rollouts: Vec<RolloutRecord>) -> Self {
        let n = rollouts.len().max(1) as f64;
        let pct = |o: Outcome| 100.0 * rollouts.iter().filter(|r| r.outcome == o).count() as f64 / n;
        let offsets: Vec<f64> = rollouts.iter().flat_map(|r| r.passes.iter().map(|p| p.offset)).collect();
        let mge = (!offsets.is_empty()).then(|| mean(&offsets));
        let laps: Vec<f64> = rollouts
            .iter()
            .filter(|r| r.outcome == Outcome::Success)
            .flat_map(|r| r.lap_times.iter().copied())
            .collect();
        let lt = (!laps.is_empty()).then(|| mean(&laps));
        Self {
            sr: pct(Outcome::Success),
            mge,
            lt,
            crash_pct: pct(Outcome::Crash),
            timeout_pct: pct(Outcome::Timeout),
            rollouts,
        }
    }

    /// The report as a small table: SR, MGE and LT, with `-` for absent values.
    pub fn summary(&self, label: &str) -> String {
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        format!(
            "{:<16} {:>7} {:>8} {:>7}\n{:<16} {:>7.1} {:>8} {:>7}\n",
            "policy",
            "SR [%]",
            "MGE [m]",
            "LT [s]",
            label,
            self.sr,
            opt(self.mge, 3),
            opt(self.lt, 2)
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary("policy"))
    }
}

/// Waypoints through every gate center along its pass direction, starting
/// at the track start: one meter before, at, and one meter after each gate.
pub fn center_line(track: &Track, laps: u64) -> Vec<Vector3<f64>> {
    let mut pts = vec![track.start.position];
    let rounds = if track.cyclic { laps } else { 1 };
    for _ in 0..rounds {
        for g in &track.gates {
            let f = g.forward();
            pts.extend([g.center - f, g.center, g.center + f]);
        }
    }
    pts
}

/// Positions sampled every `dt` while moving along `waypoints` at `speed`.
pub fn sample_path(waypoints: &[Vector3<f64>], speed: f64, dt: f64) -> Vec<Vector3<f64>> {
    let step = speed * dt;
    let mut out = vec![waypoints[0]];
    let mut carry = 0.0;
    for w in waypoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b - a).norm();
        let mut s = step - carry;
        while s <= len {
            out.push(a + (b - a) * (s / len));
            s += step;
        }
        carry = len - (s - step);
    }
    out
}

/// Scores a position trajectory sampled every `dt` with the same pass,
/// collision and ground tests as the environment.
pub fn kinematic_rollout(track: &Track, positions: &[Vector3<f64>], dt: f64, laps: u64) -> RolloutRecord {
    let need = required_passes(track, laps);
    let mut passes = Vec::new();
    for (k, w) in positions.windows(2).enumerate() {
        let (prev, curr) = (&w[0], &w[1]);
        if curr.z < 0.0 || detect_gate_collision(prev, curr, DRONE_RADIUS, &track.gates) {
            return RolloutRecord { outcome: Outcome::Crash, passes, lap_times: Vec::new(), steps: k + 1 };
        }
        let Some(target) = track.target_gate(passes.len() as u64) else { break };
        if let Some(c) = detect_gate_pass(prev, curr, &track.gates[target]) {
            passes.push(PassEvent { gate: target, offset: c.offset, time: (k as f64 + c.fraction) * dt });
            if passes.len() as u64 == need {
                let lap_times = lap_times(&passes, track.n_gates());
                return RolloutRecord { outcome: Outcome::Success, passes, lap_times, steps: k + 1 };
            }
        }
    }
    RolloutRecord { outcome: Outcome::Timeout, passes, lap_times: Vec::new(), steps: positions.len().saturating_sub(1) }
}
