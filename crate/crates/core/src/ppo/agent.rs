use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gatecam::GateMask;
use crate::neural::{load_checkpoint, save_checkpoint, Inputs, Network, NetworkSpec};
use crate::raceenv::{Observation, ObservationMode};

/// Rows per forward shard. Fixed so results do not depend on the thread count.
pub const FORWARD_SHARD: usize = 25;

/// Mask quantized to bytes, the form fed to the encoder.
pub fn mask_bytes(mask: &GateMask) -> Vec<u8> {
    mask.pixels().iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8).collect()
}

pub fn bytes_to_input(bytes: &[u8]) -> Vec<f32> {
    bytes.iter().map(|&b| b as f32 / 255.0).collect()
}

/// Network inputs for a set of observations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObsBatch {
    pub n: usize,
    pub masks: Vec<u8>,
    pub actor: Vec<f32>,
    pub critic: Vec<f32>,
}

impl ObsBatch {
    pub fn from_observations(obs: &[&Observation], mode: ObservationMode) -> Result<Self> {
        let mut b = Self { n: obs.len(), ..Self::default() };
        for o in obs {
            if mode.uses_mask() {
                let m = o.mask.as_ref().ok_or_else(|| Error::ShapeMismatch("observation lacks a mask".into()))?;
                b.masks.extend(mask_bytes(m));
            }
            b.actor.extend(o.actor_vector(mode));
            b.critic.extend(o.critic_vector(mode));
        }
        Ok(b)
    }
}

/// A policy and value network with its parameters.
#[derive(Clone, Debug)]
pub struct Agent {
    net: Network,
    params: Vec<f32>,
    mode: ObservationMode,
}

impl Agent {
    pub fn new(mode: ObservationMode, seed: u64) -> Result<Self> {
        let net = Network::new(NetworkSpec::for_mode(mode))?;
        let params = net.init(seed);
        Ok(Self { net, params, mode })
    }

    pub fn from_params(mode: ObservationMode, params: Vec<f32>) -> Result<Self> {
        let net = Network::new(NetworkSpec::for_mode(mode))?;
        if params.len() != net.n_params() {
            return Err(Error::ShapeMismatch(format!("expected {} parameters, got {}", net.n_params(), params.len())));
        }
        Ok(Self { net, params, mode })
    }

    pub fn load(mode: ObservationMode, path: impl AsRef<Path>) -> Result<Self> {
        let spec = NetworkSpec::for_mode(mode);
        let params = load_checkpoint(path, spec.hash())?;
        Self::from_params(mode, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_checkpoint(path, self.net.spec().hash(), &self.params)
    }

    pub fn mode(&self) -> ObservationMode {
        self.mode
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Vec<f32> {
        &mut self.params
    }

    pub fn log_std(&self) -> [f64; 4] {
        let r = self.net.log_std_range();
        std::array::from_fn(|i| self.params[r.start + i] as f64)
    }

    /// Action means and values, computed in fixed-size shards.
    pub fn evaluate(&self, batch: &ObsBatch) -> Result<(Vec<[f64; 4]>, Vec<f64>)> {
        let ml = batch.masks.len() / batch.n.max(1);
        let (av, cv) = (self.net.spec().actor_vector, self.net.spec().critic_vector);
        let shards: Vec<usize> = (0..batch.n).step_by(FORWARD_SHARD).collect();
        let parts = shards
            .par_iter()
            .map(|&s| {
                let e = (s + FORWARD_SHARD).min(batch.n);
                let masks = self.mode.uses_mask().then(|| bytes_to_input(&batch.masks[s * ml..e * ml]));
                let inputs = Inputs {
                    n: e - s,
                    masks: masks.as_deref(),
                    actor: &batch.actor[s * av..e * av],
                    critic: &batch.critic[s * cv..e * cv],
                };
                let f = self.net.forward(&self.params, &inputs)?;
                let means: Vec<[f64; 4]> =
                    f.mean().chunks_exact(4).map(|c| std::array::from_fn(|i| c[i] as f64)).collect();
                let values: Vec<f64> = f.value().iter().map(|&v| v as f64).collect();
                Ok((means, values))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut means = Vec::with_capacity(batch.n);
        let mut values = Vec::with_capacity(batch.n);
        for (m, v) in parts {
            means.extend(m);
            values.extend(v);
        }
        Ok((means, values))
    }

    /// Mean action for a single observation, clipped to `[-1, 1]`.
    pub fn act_deterministic(&self, obs: &Observation) -> Result<[f64; 4]> {
        let batch = ObsBatch::from_observations(&[obs], self.mode)?;
        let (means, _) = self.evaluate(&batch)?;
        Ok(crate::neural::deterministic_action(&means[0]))
    }
}
