use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::agent::bytes_to_input;
use super::gae::normalize;
use crate::error::{Error, Result};
use crate::neural::{gaussian_entropy, Inputs, Network, OutputGrads};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub lr_start: f64,
    pub lr_end: f64,
    pub gamma: f64,
    /// Discount used on acyclic tracks.
    pub gamma_acyclic: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub n_envs: usize,
    /// Steps per environment per rollout.
    pub n_steps: usize,
    pub minibatch: usize,
    /// Samples per gradient shard; fixed so results do not depend on the
    /// thread count.
    pub shard_size: usize,
    pub total_steps: u64,
    /// Save a checkpoint every this many updates; 0 disables.
    pub checkpoint_every: usize,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr_start: 3e-4,
            lr_end: 1e-5,
            gamma: 0.995,
            gamma_acyclic: 0.98,
            gae_lambda: 0.95,
            epochs: 10,
            clip: 0.2,
            entropy_coef: 0.001,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            n_envs: 100,
            n_steps: 250,
            minibatch: 6250,
            shard_size: 250,
            total_steps: 2_000_000,
            checkpoint_every: 20,
            adam: AdamConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.n_envs * self.n_steps
    }

    pub fn discount(&self, cyclic: bool) -> f64 {
        if cyclic {
            self.gamma
        } else {
            self.gamma_acyclic
        }
    }

    /// Learning rate after `steps` collected environment steps.
    pub fn learning_rate(&self, steps: u64) -> f64 {
        if self.total_steps == 0 {
            return self.lr_end;
        }
        let frac = (steps as f64 / self.total_steps as f64).min(1.0);
        self.lr_start + (self.lr_end - self.lr_start) * frac
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParam { name, reason: reason.into() });
        if !(self.gamma > 0.0 && self.gamma <= 1.0 && self.gamma_acyclic > 0.0 && self.gamma_acyclic <= 1.0) {
            return bad("gamma", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", "must lie in [0, 1]");
        }
        if self.n_envs == 0 || self.n_steps == 0 || self.minibatch == 0 || self.shard_size == 0 || self.epochs == 0 {
            return bad("batch", "sizes and epochs must be positive");
        }
        if !self.batch_size().is_multiple_of(self.minibatch) {
            return bad("minibatch", "must divide n_envs * n_steps");
        }
        if !(self.lr_start > 0.0 && self.lr_end >= 0.0) {
            return bad("lr", "must be positive");
        }
        if !(self.clip > 0.0 && self.max_grad_norm > 0.0 && self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return bad("coefficients", "clip and grad norm must be positive, coefficients nonnegative");
        }
        Ok(())
    }
}

/// Flattened training samples for one update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateBatch {
    pub n: usize,
    pub action_dim: usize,
    /// Byte masks, empty without an encoder.
    pub masks: Vec<u8>,
    pub actor: Vec<f32>,
    pub critic: Vec<f32>,
    /// Unclipped sampled actions.
    pub actions: Vec<f64>,
    pub old_log_prob: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
}

impl std::ops::AddAssign for UpdateStats {
    fn add_assign(&mut self, o: Self) {
        self.policy_loss += o.policy_loss;
        self.value_loss += o.value_loss;
        self.entropy += o.entropy;
        self.clip_frac += o.clip_frac;
        self.approx_kl += o.approx_kl;
    }
}

impl UpdateStats {
    fn scaled(mut self, k: f64) -> Self {
        self.policy_loss *= k;
        self.value_loss *= k;
        self.entropy *= k;
        self.clip_frac *= k;
        self.approx_kl *= k;
        self
    }
}

/// Loss terms and gradient for `idx` samples of `batch`, each term averaged
/// over `denom` samples.
fn shard_grad(
    net: &Network,
    params: &[f32],
    batch: &UpdateBatch,
    idx: &[usize],
    denom: f64,
    cfg: &PpoConfig,
) -> Result<(UpdateStats, Vec<f64>)> {
    let spec = net.spec();
    let (av, cv, ad) = (spec.actor_vector, spec.critic_vector, batch.action_dim);
    let ml = spec.encoder.as_ref().map_or(0, |e| e.input_len());
    let n = idx.len();
    let gather = |src: &[f32], w: usize| idx.iter().flat_map(|&i| src[i * w..(i + 1) * w].iter().copied()).collect::<Vec<_>>();
    let actor = gather(&batch.actor, av);
    let critic = gather(&batch.critic, cv);
    let masks = (ml > 0).then(|| {
        let bytes: Vec<u8> = idx.iter().flat_map(|&i| batch.masks[i * ml..(i + 1) * ml].iter().copied()).collect();
        bytes_to_input(&bytes)
    });
    let fwd = net.forward(params, &Inputs { n, masks: masks.as_deref(), actor: &actor, critic: &critic })?;
    let ls_range = net.log_std_range();
    let log_std: Vec<f64> = params[ls_range].iter().map(|&x| x as f64).collect();
    let inv_var: Vec<f64> = log_std.iter().map(|l| (-2.0 * l).exp()).collect();

    let mut stats = UpdateStats::default();
    let mut d_mean = vec![0.0f32; n * ad];
    let mut d_value = vec![0.0f32; n];
    let mut d_ls = vec![0.0f64; ad];
    for (r, &i) in idx.iter().enumerate() {
        let mean: Vec<f64> = fwd.mean()[r * ad..(r + 1) * ad].iter().map(|&x| x as f64).collect();
        let a = &batch.actions[i * ad..(i + 1) * ad];
        let logp = crate::neural::gaussian_log_prob(a, &mean, &log_std);
        let log_ratio = logp - batch.old_log_prob[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let surrogate = (ratio * adv).min(clipped * adv);
        let is_clipped = (adv >= 0.0 && ratio > 1.0 + cfg.clip) || (adv < 0.0 && ratio < 1.0 - cfg.clip);
        stats.policy_loss -= surrogate / denom;
        stats.clip_frac += if (ratio - 1.0).abs() > cfg.clip { 1.0 / denom } else { 0.0 };
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / denom;
        // d(-surrogate)/d(logp)
        let g = if is_clipped { 0.0 } else { -ratio * adv / denom };
        for j in 0..ad {
            let diff = a[j] - mean[j];
            d_mean[r * ad + j] = (g * diff * inv_var[j]) as f32;
            d_ls[j] += g * (diff * diff * inv_var[j] - 1.0);
        }
        let v = fwd.value()[r] as f64;
        let err = v - batch.returns[i];
        stats.value_loss += err * err / denom;
        d_value[r] = (cfg.value_coef * 2.0 * err / denom) as f32;
    }
    let share = n as f64 / denom;
    stats.entropy = gaussian_entropy(&log_std) * share;
    for d in &mut d_ls {
        *d -= cfg.entropy_coef * share;
    }
    let d_ls32: Vec<f32> = d_ls.iter().map(|&x| x as f32).collect();
    let g = net.backward(params, &fwd, &OutputGrads { d_mean: &d_mean, d_value: &d_value, d_log_std: &d_ls32 })?;
    Ok((stats, g.into_iter().map(|x| x as f64).collect()))
}

/// Total loss and gradient over `idx`, evaluated shard by shard and reduced
/// in shard order.
pub fn minibatch_gradient(
    net: &Network,
    params: &[f32],
    batch: &UpdateBatch,
    idx: &[usize],
    cfg: &PpoConfig,
) -> Result<(UpdateStats, Vec<f64>)> {
    let denom = idx.len() as f64;
    let parts: Vec<_> =
        idx.par_chunks(cfg.shard_size).map(|s| shard_grad(net, params, batch, s, denom, cfg)).collect::<Result<_>>()?;
    let mut stats = UpdateStats::default();
    let mut grad = vec![0.0; net.n_params()];
    for (s, g) in parts {
        stats += s;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((stats, grad))
}

/// Loss minimized by the update: clipped surrogate, entropy bonus and value error.
pub fn total_loss(stats: &UpdateStats, cfg: &PpoConfig) -> f64 {
    stats.policy_loss - cfg.entropy_coef * stats.entropy + cfg.value_coef * stats.value_loss
}

/// Runs `epochs` passes of shuffled minibatch Adam steps. Advantages are
/// standardized over the whole batch first. Returns statistics averaged
/// over all minibatch steps.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &Network,
    params: &mut [f32],
    adam: &mut Adam,
    batch: &UpdateBatch,
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut R,
) -> Result<UpdateStats> {
    let mut batch = batch.clone();
    normalize(&mut batch.advantages);
    let mb = cfg.minibatch.min(batch.n).max(1);
    let mut order: Vec<usize> = (0..batch.n).collect();
    let mut total = UpdateStats::default();
    let mut count = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for (k, idx) in order.chunks(mb).enumerate() {
            let (stats, mut grad) = minibatch_gradient(net, params, &batch, idx, cfg)?;
            let loss = total_loss(&stats, cfg);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::NonFiniteLoss(format!(
                    "epoch {epoch} minibatch {k}: loss {loss}, grad norm {norm}, policy {}, value {}, entropy {}",
                    stats.policy_loss, stats.value_loss, stats.entropy
                )));
            }
            if norm > cfg.max_grad_norm {
                let s = cfg.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.step(params, &grad, lr);
            total += stats;
            count += 1;
        }
    }
    Ok(total.scaled(1.0 / count as f64))
}
