use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::ppo::Agent;
use crate::quadsim::{Action, QuadParams, QuadState};
use crate::raceenv::{Observation, RaceEnv};
use crate::track::Track;

use super::metrics::center_line;

/// Anything that picks normalized actions during an evaluation rollout.
pub trait Controller {
    fn act(&mut self, env: &RaceEnv, obs: &Observation) -> Result<[f64; 4]>;
}

/// Deterministic (mean) actions of a trained agent.
#[derive(Clone, Debug)]
pub struct AgentController(pub Arc<Agent>);

impl Controller for AgentController {
    fn act(&mut self, _env: &RaceEnv, obs: &Observation) -> Result<[f64; 4]> {
        self.0.act_deterministic(obs)
    }
}

/// The same action every step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantAction(pub [f64; 4]);

impl Controller for ConstantAction {
    fn act(&mut self, _env: &RaceEnv, _obs: &Observation) -> Result<[f64; 4]> {
        Ok(self.0)
    }
}

/// Replays a recorded action sequence, holding the last action afterwards.
#[derive(Clone, Debug)]
pub struct Replay {
    actions: Arc<Vec<[f64; 4]>>,
    next: usize,
}

impl Replay {
    pub fn new(actions: Arc<Vec<[f64; 4]>>) -> Self {
        assert!(!actions.is_empty(), "empty replay");
        Self { actions, next: 0 }
    }
}

impl Controller for Replay {
    fn act(&mut self, _env: &RaceEnv, _obs: &Observation) -> Result<[f64; 4]> {
        let a = self.actions[self.next.min(self.actions.len() - 1)];
        self.next += 1;
        Ok(a)
    }
}

/// Position-tracking pilot that follows the gate center line with a
/// carrot point, using the simulator state directly.
#[derive(Clone, Debug)]
pub struct ScriptedPilot {
    path: Vec<Vector3<f64>>,
    seg: usize,
    pub speed: f64,
    pub lookahead: f64,
    pub kp: f64,
    pub kd: f64,
    pub k_att: f64,
    params: QuadParams,
}

impl ScriptedPilot {
    pub fn new(track: &Track, laps: u64, params: QuadParams) -> Self {
        let mut path = center_line(track, laps);
        let last = track.gates.last().expect("gates").clone();
        path.push(last.center + 5.0 * last.forward());
        Self { path, seg: 0, speed: 3.0, lookahead: 1.0, kp: 6.0, kd: 4.0, k_att: 8.0, params }
    }

    fn carrot(&mut self, p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        let closest = |a: &Vector3<f64>, b: &Vector3<f64>| {
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared().max(1e-12)).clamp(0.0, 1.0);
            (t, (a + ab * t - p).norm())
        };
        // Advance while the next segment is at least as close.
        while self.seg + 2 < self.path.len() {
            let (_, here) = closest(&self.path[self.seg], &self.path[self.seg + 1]);
            let (_, next) = closest(&self.path[self.seg + 1], &self.path[self.seg + 2]);
            if next <= here {
                self.seg += 1;
            } else {
                break;
            }
        }
        let (t, _) = closest(&self.path[self.seg], &self.path[self.seg + 1]);
        let mut seg = self.seg;
        let mut remaining = self.lookahead;
        let mut from = self.path[seg] + (self.path[seg + 1] - self.path[seg]) * t;
        loop {
            let to = self.path[seg + 1];
            let len = (to - from).norm();
            if len >= remaining || seg + 2 >= self.path.len() {
                let dir = (to - from).try_normalize(1e-12).unwrap_or_else(Vector3::x);
                return (from + dir * remaining.min(len), dir);
            }
            remaining -= len;
            from = to;
            seg += 1;
        }
    }

    /// Normalized action for the given state.
    pub fn command(&mut self, state: &QuadState) -> [f64; 4] {
        let (target, dir) = self.carrot(&state.position);
        let v_ref = dir * self.speed;
        let acc = self.kp * (target - state.position) + self.kd * (v_ref - state.velocity) - self.params.gravity();
        let r = state.rotation();
        let thrust = acc.dot(&r.column(2).into_owned()).max(0.0);
        let z_des = acc.try_normalize(1e-9).unwrap_or_else(Vector3::z);
        let heading = Vector3::new(dir.x, dir.y, 0.0).try_normalize(1e-9).unwrap_or_else(|| r.column(0).into_owned());
        let y_des = z_des.cross(&heading).normalize();
        let x_des = y_des.cross(&z_des);
        let r_des = Matrix3::from_columns(&[x_des, y_des, z_des]);
        let e = 0.5 * (r_des.transpose() * r - r.transpose() * r_des);
        let e_r = Vector3::new(e[(2, 1)], e[(0, 2)], e[(1, 0)]);
        let rates = -self.k_att * e_r;
        Action::new(thrust, rates).to_normalized(&self.params)
    }
}

impl Controller for ScriptedPilot {
    fn act(&mut self, env: &RaceEnv, _obs: &Observation) -> Result<[f64; 4]> {
        Ok(self.command(env.state()))
    }
}
