use std::collections::VecDeque;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adam::Adam;
use super::agent::{Agent, ObsBatch};
use super::gae::compute_gae;
use super::update::{ppo_update, PpoConfig, UpdateBatch};
use crate::error::Result;
use crate::neural::sample_action;
use crate::raceenv::{DoneReason, EnvConfig, Observation, VecEnv};
use crate::track::Track;

/// Episodes averaged in the curve columns.
pub const EPISODE_WINDOW: usize = 100;

pub const FINAL_CHECKPOINT: &str = "ckpt-final.ckpt";

pub const CURVE_COLUMNS: [&str; 10] = [
    "env_steps",
    "mean_ep_reward",
    "mean_ep_len",
    "sr_rolling",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_frac",
    "kl",
    "lr",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainOptions {
    pub seed: u64,
    /// Directory for `curve.csv` and the `ckpt-*` checkpoints.
    pub out_dir: Option<PathBuf>,
    /// Checkpoint to start from; the optimizer state starts fresh.
    pub resume: Option<PathBuf>,
    /// Environment steps already spent; counted against `total_steps`.
    pub start_steps: u64,
    /// Step environments and shards on the rayon pool.
    pub parallel: bool,
}

/// One row of the training curve, written after every update.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub env_steps: u64,
    pub mean_ep_reward: Option<f64>,
    pub mean_ep_len: Option<f64>,
    pub sr_rolling: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub kl: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub curve: Vec<CurveRow>,
}

struct Seeds {
    net: u64,
    env: u64,
    sampler: u64,
    shuffle: u64,
}

impl Seeds {
    fn derive(seed: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        Self { net: r.random(), env: r.random(), sampler: r.random(), shuffle: r.random() }
    }
}

/// Trains a policy with PPO and returns the final agent and curve.
pub fn train(
    track: Arc<Track>,
    env_cfg: EnvConfig,
    ppo: &PpoConfig,
    opts: &TrainOptions,
    on_row: &mut dyn FnMut(&CurveRow),
) -> Result<TrainOutcome> {
    ppo.validate()?;
    let mode = env_cfg.mode;
    let seeds = Seeds::derive(opts.seed);
    let mut agent = match &opts.resume {
        Some(path) => Agent::load(mode, path)?,
        None => Agent::new(mode, seeds.net)?,
    };
    let net = agent.network().clone();
    let mut adam = Adam::new(net.n_params(), ppo.adam);
    let gamma = ppo.discount(track.cyclic);
    let mut venv = VecEnv::new(Arc::new(env_cfg), track, ppo.n_envs, seeds.env)?.with_parallel(opts.parallel);
    let mut sampler = ChaCha8Rng::seed_from_u64(seeds.sampler);
    let mut shuffler = ChaCha8Rng::seed_from_u64(seeds.shuffle);

    let mut writer = match &opts.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(dir.join("curve.csv"))?;
            w.write_record(CURVE_COLUMNS)?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };

    let n = ppo.n_envs;
    let batch_size = ppo.batch_size() as u64;
    let updates = ppo.total_steps.saturating_sub(opts.start_steps).div_ceil(batch_size);
    let mut episodes: VecDeque<(f64, usize, bool)> = VecDeque::with_capacity(EPISODE_WINDOW);
    let mut obs = venv.reset();
    let mut env_steps = opts.start_steps;
    let mut curve = Vec::new();

    for update in 0..updates {
        let lr = ppo.learning_rate(env_steps);
        let mut data = UpdateBatch { action_dim: 4, ..UpdateBatch::default() };
        let mut rewards = Vec::with_capacity(ppo.batch_size());
        let mut values = Vec::with_capacity(ppo.batch_size());
        let mut dones = Vec::with_capacity(ppo.batch_size());

        for _ in 0..ppo.n_steps {
            let refs: Vec<&Observation> = obs.iter().collect();
            let inputs = ObsBatch::from_observations(&refs, mode)?;
            let (means, vals) = agent.evaluate(&inputs)?;
            let log_std = agent.log_std();
            let samples: Vec<_> = means.iter().map(|m| sample_action(m, &log_std, &mut sampler)).collect();
            let actions: Vec<[f64; 4]> = samples.iter().map(|s| s.clipped).collect();
            let results = venv.step(&actions)?;

            // Timeouts are truncations: fold the value of the final state into the reward.
            let truncated: Vec<usize> =
                (0..n).filter(|&e| results[e].done_reason == Some(DoneReason::Timeout)).collect();
            let mut tail = vec![0.0; n];
            if !truncated.is_empty() {
                let term: Vec<&Observation> =
                    truncated.iter().map(|&e| results[e].terminal_obs.as_ref().expect("auto-reset")).collect();
                let (_, tv) = agent.evaluate(&ObsBatch::from_observations(&term, mode)?)?;
                for (k, &e) in truncated.iter().enumerate() {
                    tail[e] = gamma * tv[k];
                }
            }

            data.masks.extend_from_slice(&inputs.masks);
            data.actor.extend_from_slice(&inputs.actor);
            data.critic.extend_from_slice(&inputs.critic);
            for (e, r) in results.iter().enumerate() {
                data.actions.extend_from_slice(&samples[e].raw);
                data.old_log_prob.push(samples[e].log_prob);
                rewards.push(r.reward + tail[e]);
                values.push(vals[e]);
                dones.push(r.done);
                if let Some(ep) = &r.episode {
                    if episodes.len() == EPISODE_WINDOW {
                        episodes.pop_front();
                    }
                    episodes.push_back((ep.total_reward, ep.length, ep.success));
                }
            }
            obs = results.into_iter().map(|r| r.obs).collect();
        }

        let refs: Vec<&Observation> = obs.iter().collect();
        let (_, last_values) = agent.evaluate(&ObsBatch::from_observations(&refs, mode)?)?;
        let total = ppo.batch_size();
        data.n = total;
        data.advantages = vec![0.0; total];
        data.returns = vec![0.0; total];
        for e in 0..n {
            let col = |v: &[f64]| (0..ppo.n_steps).map(|t| v[t * n + e]).collect::<Vec<_>>();
            let d: Vec<bool> = (0..ppo.n_steps).map(|t| dones[t * n + e]).collect();
            let (adv, ret) = compute_gae(&col(&rewards), &col(&values), &d, last_values[e], gamma, ppo.gae_lambda);
            for t in 0..ppo.n_steps {
                data.advantages[t * n + e] = adv[t];
                data.returns[t * n + e] = ret[t];
            }
        }

        let stats = ppo_update(&net, agent.params_mut(), &mut adam, &data, ppo, lr, &mut shuffler)?;
        env_steps += batch_size;

        let k = episodes.len() as f64;
        let window = |f: &dyn Fn(&(f64, usize, bool)) -> f64| (k > 0.0).then(|| episodes.iter().map(f).sum::<f64>() / k);
        let row = CurveRow {
            env_steps,
            mean_ep_reward: window(&|e| e.0),
            mean_ep_len: window(&|e| e.1 as f64),
            sr_rolling: window(&|e| if e.2 { 1.0 } else { 0.0 }),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_frac: stats.clip_frac,
            kl: stats.approx_kl,
            lr,
        };
        if let Some(w) = writer.as_mut() {
            w.serialize(&row)?;
            w.flush()?;
        }
        if let Some(dir) = &opts.out_dir {
            if ppo.checkpoint_every > 0 && (update + 1) % ppo.checkpoint_every as u64 == 0 {
                agent.save(dir.join(format!("ckpt-{env_steps:010}.ckpt")))?;
            }
        }
        on_row(&row);
        curve.push(row);
    }
    if let Some(dir) = &opts.out_dir {
        agent.save(dir.join(FINAL_CHECKPOINT))?;
    }
    Ok(TrainOutcome { agent, curve })
}
