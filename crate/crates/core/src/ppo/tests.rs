use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::neural::{gaussian_log_prob, Network, NetworkSpec};
use crate::raceenv::{EnvConfig, ObservationMode};
use crate::track::{Gate, Track};

/// Advantage as an explicit discounted sum of TD errors.
fn brute_gae(r: &[f64], v: &[f64], d: &[bool], boot: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let next = |t: usize| if t + 1 < n { v[t + 1] } else { boot };
    let delta: Vec<f64> = (0..n).map(|t| r[t] + gamma * next(t) * if d[t] { 0.0 } else { 1.0 } - v[t]).collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for l in t..n {
                sum += weight * delta[l];
                if d[l] {
                    break;
                }
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}

#[test]
fn gae_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for case in 0..100 {
        let n = 1 + case % 50;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.15)).collect();
        let boot = rng.random_range(-1.0..1.0);
        let (adv, ret) = compute_gae(&r, &v, &d, boot, 0.995, 0.95);
        let want = brute_gae(&r, &v, &d, boot, 0.995, 0.95);
        for t in 0..n {
            assert!((adv[t] - want[t]).abs() < 1e-9);
            assert!((ret[t] - adv[t] - v[t]).abs() < 1e-12);
        }
    }
}

#[test]
fn learning_rate_schedule() {
    let cfg = PpoConfig { total_steps: 2_000_000, ..PpoConfig::default() };
    assert!((cfg.learning_rate(0) - 3e-4).abs() < 1e-12);
    assert!((cfg.learning_rate(2_000_000) - 1e-5).abs() < 1e-12);
    assert!((cfg.learning_rate(1_000_000) - 1.55e-4).abs() < 1e-12);
    assert!((cfg.learning_rate(5_000_000) - 1e-5).abs() < 1e-12);
    assert_eq!(cfg.batch_size(), 25_000);
    assert_eq!(cfg.batch_size() / cfg.minibatch, 4);
    assert_eq!(cfg.discount(false), 0.98);
    assert!(PpoConfig { minibatch: 7000, ..PpoConfig::default() }.validate().is_err());
}

fn bandit_net() -> Network {
    Network::new(NetworkSpec {
        encoder: None,
        actor_vector: 1,
        critic_vector: 1,
        critic_latent: false,
        hidden: vec![8],
        action_dim: 1,
        log_std_init: 0.5f64.ln(),
    })
    .unwrap()
}

fn bandit_batch(net: &Network, params: &[f32], n: usize, rng: &mut ChaCha8Rng) -> UpdateBatch {
    let inputs = crate::neural::Inputs { n: 1, masks: None, actor: &[1.0], critic: &[1.0] };
    let f = net.forward(params, &inputs).unwrap();
    let (mean, value) = (f.mean()[0] as f64, f.value()[0] as f64);
    let ls = params[net.log_std_range()][0] as f64;
    let mut b = UpdateBatch { n, action_dim: 1, actor: vec![1.0; n], critic: vec![1.0; n], ..UpdateBatch::default() };
    for _ in 0..n {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        let a = mean + ls.exp() * z;
        let reward = -a * a;
        b.actions.push(a);
        b.old_log_prob.push(gaussian_log_prob(&[a], &[mean], &[ls]));
        let (adv, ret) = compute_gae(&[reward], &[value], &[true], 0.0, 0.995, 0.95);
        b.advantages.push(adv[0]);
        b.returns.push(ret[0]);
    }
    b
}

fn bandit_cfg() -> PpoConfig {
    PpoConfig { epochs: 4, minibatch: 32, shard_size: 16, n_envs: 1, n_steps: 128, ..PpoConfig::default() }
}

#[test]
fn ratio_one_gives_mean_advantage() {
    let net = bandit_net();
    let params = net.init(0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = bandit_batch(&net, &params, 64, &mut rng);
    let idx: Vec<usize> = (0..64).collect();
    let cfg = bandit_cfg();
    let (stats, _) = minibatch_gradient(&net, &params, &b, &idx, &cfg).unwrap();
    let mean_adv = b.advantages.iter().sum::<f64>() / 64.0;
    assert!((stats.policy_loss + mean_adv).abs() < 1e-12);
    assert_eq!(stats.clip_frac, 0.0);

    let mut zero = b.clone();
    zero.advantages.fill(0.0);
    let (stats, _) = minibatch_gradient(&net, &params, &zero, &idx, &cfg).unwrap();
    assert_eq!(stats.policy_loss, 0.0);
    assert_eq!(stats.clip_frac, 0.0);
    let ls = params[net.log_std_range()][0] as f64;
    assert!((stats.entropy - crate::neural::gaussian_entropy(&[ls])).abs() < 1e-9);
}

#[test]
fn update_ignores_constant_advantage_shift() {
    let net = bandit_net();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p0 = net.init(0);
    let b = bandit_batch(&net, &p0, 128, &mut rng);
    let mut shifted = b.clone();
    shifted.advantages.iter_mut().for_each(|a| *a += 3.0);
    let cfg = bandit_cfg();
    let run = |batch: &UpdateBatch| {
        let mut p = p0.clone();
        let mut adam = Adam::new(p.len(), cfg.adam);
        ppo_update(&net, &mut p, &mut adam, batch, &cfg, 1e-3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        p
    };
    let (a, c) = (run(&b), run(&shifted));
    for (x, y) in a.iter().zip(&c) {
        assert!((x - y).abs() < 1e-6, "{x} {y}");
    }
}

#[test]
fn bandit_mean_converges_to_optimum() {
    let net = bandit_net();
    let mut params = net.init(3);
    // Start away from the optimum through the output bias.
    let out = net.policy_out_range();
    params[out.end - 1] = 0.8;
    let cfg = bandit_cfg();
    let mut adam = Adam::new(params.len(), cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mean_of = |p: &[f32]| {
        let f = net.forward(p, &crate::neural::Inputs { n: 1, masks: None, actor: &[1.0], critic: &[1.0] }).unwrap();
        f.mean()[0] as f64
    };
    assert!(mean_of(&params) > 0.7);
    for _ in 0..200 {
        let b = bandit_batch(&net, &params, 128, &mut rng);
        ppo_update(&net, &mut params, &mut adam, &b, &cfg, 3e-3, &mut rng).unwrap();
    }
    assert!(mean_of(&params).abs() < 0.05, "mean {}", mean_of(&params));
}

#[test]
fn non_finite_loss_aborts() {
    let net = bandit_net();
    let mut params = net.init(0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut b = bandit_batch(&net, &params, 32, &mut rng);
    b.returns[3] = f64::NAN;
    let cfg = bandit_cfg();
    let mut adam = Adam::new(params.len(), cfg.adam);
    let before = params.clone();
    let r = ppo_update(&net, &mut params, &mut adam, &b, &cfg, 1e-3, &mut rng);
    assert!(matches!(r, Err(crate::Error::NonFiniteLoss(_))));
    assert_eq!(params, before);
}

#[test]
fn gradient_is_independent_of_thread_count() {
    let net = bandit_net();
    let params = net.init(0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let b = bandit_batch(&net, &params, 96, &mut rng);
    let idx: Vec<usize> = (0..96).rev().collect();
    let cfg = bandit_cfg();
    let in_pool = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| minibatch_gradient(&net, &params, &b, &idx, &cfg).unwrap().1)
    };
    assert_eq!(in_pool(1), in_pool(3));
}

fn tiny_run(seed: u64, parallel: bool, out: Option<std::path::PathBuf>) -> TrainOutcome {
    let gates = vec![
        Gate::new(Vector3::new(0.0, 0.0, 2.0), 0.0, 1.5, 0.2),
        Gate::new(Vector3::new(5.0, 0.0, 2.0), 0.0, 1.5, 0.2),
    ];
    let track = Arc::new(Track::new("mini", gates, false, None).unwrap());
    let ppo = PpoConfig {
        n_envs: 4,
        n_steps: 32,
        minibatch: 64,
        shard_size: 32,
        epochs: 2,
        total_steps: 256,
        checkpoint_every: 1,
        ..PpoConfig::default()
    };
    let opts = TrainOptions { seed, out_dir: out, parallel, ..TrainOptions::default() };
    train(track, EnvConfig { mode: ObservationMode::State, ..EnvConfig::default() }, &ppo, &opts, &mut |_| {}).unwrap()
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = tiny_run(7, true, Some(dir.path().join("a")));
    let b = tiny_run(7, false, Some(dir.path().join("b")));
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.curve.len(), 2);
    assert_eq!(a.curve[1].env_steps, 256);
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/curve.csv"), read("b/curve.csv"));
    assert_eq!(read("a/ckpt-final.ckpt"), read("b/ckpt-final.ckpt"));
    assert!(dir.path().join("a/ckpt-0000000128.ckpt").exists());
    assert_ne!(tiny_run(8, true, None).curve, a.curve);
    let loaded = Agent::load(ObservationMode::State, dir.path().join("a/ckpt-final.ckpt")).unwrap();
    assert_eq!(loaded.params(), a.agent.params());
}

#[test]
fn zero_budget_writes_header_only_curve() {
    let dir = tempfile::tempdir().unwrap();
    let gates = vec![Gate::new(Vector3::new(0.0, 0.0, 2.0), 0.0, 1.5, 0.2)];
    let track = Arc::new(Track::new("one", gates, false, None).unwrap());
    let ppo = PpoConfig { n_envs: 2, n_steps: 8, minibatch: 16, shard_size: 8, total_steps: 0, ..PpoConfig::default() };
    let opts = TrainOptions { out_dir: Some(dir.path().to_path_buf()), ..TrainOptions::default() };
    let out = train(track, EnvConfig { mode: ObservationMode::State, ..EnvConfig::default() }, &ppo, &opts, &mut |_| {})
        .unwrap();
    assert!(out.curve.is_empty());
    let text = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(text, format!("{}\n", CURVE_COLUMNS.join(",")));
    assert!(dir.path().join(FINAL_CHECKPOINT).exists());
}
