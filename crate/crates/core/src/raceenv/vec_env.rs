use std::sync::Arc;

use rayon::prelude::*;

use super::env::{EnvConfig, Observation, RaceEnv, StepResult};
use crate::error::{Error, Result};
use crate::track::Track;

/// A batch of environments stepped together. Finished environments are
/// reset in place and report both the terminal and the fresh observation.
#[derive(Clone, Debug)]
pub struct VecEnv {
    envs: Vec<RaceEnv>,
    parallel: bool,
}

impl VecEnv {
    /// Environment `i` draws from random stream `i` of `seed`.
    pub fn new(cfg: Arc<EnvConfig>, track: Arc<Track>, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam { name: "n_envs", reason: "must be at least 1".into() });
        }
        let envs = (0..n)
            .map(|i| RaceEnv::new(cfg.clone(), track.clone(), seed, i as u64))
            .collect::<Result<_>>()?;
        Ok(Self { envs, parallel: true })
    }

    /// Steps on the rayon pool when `true`, in order on the caller otherwise.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[RaceEnv] {
        &self.envs
    }

    pub fn reset(&mut self) -> Vec<Observation> {
        if self.parallel {
            self.envs.par_iter_mut().map(RaceEnv::reset).collect()
        } else {
            self.envs.iter_mut().map(RaceEnv::reset).collect()
        }
    }

    pub fn step(&mut self, actions: &[[f64; 4]]) -> Result<Vec<StepResult>> {
        if actions.len() != self.envs.len() {
            return Err(Error::CountMismatch { expected: self.envs.len(), found: actions.len() });
        }
        if self.parallel {
            self.envs.par_iter_mut().zip(actions.par_iter()).map(|(e, a)| step_auto_reset(e, *a)).collect()
        } else {
            self.envs.iter_mut().zip(actions).map(|(e, a)| step_auto_reset(e, *a)).collect()
        }
    }
}

fn step_auto_reset(env: &mut RaceEnv, action: [f64; 4]) -> Result<StepResult> {
    let mut r = env.step(action)?;
    if r.done {
        let fresh = env.reset();
        r.terminal_obs = Some(std::mem::replace(&mut r.obs, fresh));
    }
    Ok(r)
}
