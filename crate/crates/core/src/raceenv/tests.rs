use std::sync::Arc;

use nalgebra::Vector3;

use super::*;
use crate::quadsim::{Action, QuadParams, QuadState, RandomizationSpec};
use crate::track::{Gate, Track};

fn mini(cyclic: bool) -> Arc<Track> {
    let gates = vec![
        Gate::new(Vector3::new(0.0, 0.0, 2.0), 0.0, 1.5, 0.2),
        Gate::new(Vector3::new(5.0, 0.0, 2.0), 0.0, 1.5, 0.2),
    ];
    Arc::new(Track::new("mini", gates, cyclic, None).unwrap())
}

fn cfg(mode: ObservationMode, rand: RandomizationSpec) -> Arc<EnvConfig> {
    Arc::new(EnvConfig { mode, randomization: rand, ..EnvConfig::default() })
}

fn hover_action() -> [f64; 4] {
    let p = QuadParams::default();
    Action::hover(&p).to_normalized(&p)
}

#[test]
fn zero_width_reset_returns_buffer_entry() {
    let track = mini(true);
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), track.clone(), 3, 0).unwrap();
    env.reset();
    let p = QuadParams::default();
    let seeds: Vec<_> = (0..2).map(|g| seed_entry(&track, &p, g, 2.0)).collect();
    assert!(seeds.iter().any(|e| e.state == *env.state() && e.passed == env.progress().passed));
    assert_eq!(env.params(), &p);
    assert_eq!(env.track(), &*track);
}

#[test]
fn reset_bounds_and_slot_coverage() {
    let track = mini(true);
    let p = QuadParams::default();
    let seeds: Vec<_> = (0..2).map(|g| seed_entry(&track, &p, g, 2.0)).collect();
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::default()), track, 11, 0).unwrap();
    let mut counts = [0usize; 2];
    let mut max = [0.0f64; 3];
    for _ in 0..10_000 {
        env.reset();
        let slot = env.progress().passed as usize % 2;
        counts[slot] += 1;
        let d = env.state().position - seeds[slot].state.position;
        assert!(d.x.abs() <= 0.8 && d.y.abs() <= 0.8 && d.z.abs() <= 0.6, "{d:?}");
        for k in 0..3 {
            max[k] = max[k].max(d[k].abs());
        }
    }
    assert!(counts.iter().all(|&c| c > 0));
    assert!(max[0] > 0.75 && max[1] > 0.75 && max[2] > 0.55, "{max:?}");
}

#[test]
fn history_shifts_newest_last() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(true), 0, 0).unwrap();
    let start = QuadState::hovering(Vector3::new(-20.0, 10.0, 5.0), &QuadParams::default());
    let obs = env.reset_to(start, 0, QuadParams::default());
    assert_eq!(obs.history, [0.0; 12]);
    let h = hover_action();
    let acts: Vec<[f64; 4]> = (0..4).map(|k| [h[0], 0.01 * k as f64, -0.01 * k as f64, 0.02]).collect();
    let mut last = None;
    for a in &acts[..3] {
        last = Some(env.step(*a).unwrap());
    }
    let flat: Vec<f64> = acts[..3].iter().flatten().copied().collect();
    assert_eq!(last.unwrap().obs.history.to_vec(), flat);
    let r = env.step(acts[3]).unwrap();
    let flat: Vec<f64> = acts[1..].iter().flatten().copied().collect();
    assert_eq!(r.obs.history.to_vec(), flat);
}

#[test]
fn full_state_layout() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::default()), mini(true), 5, 0).unwrap();
    for _ in 0..50 {
        let obs = env.reset();
        let fs = obs.full_state;
        assert_eq!(fs.as_slice().len(), STATE_DIM);
        let (c0, c1) = fs.rotation_columns();
        assert!((c0.norm() - 1.0).abs() < 1e-6 && (c1.norm() - 1.0).abs() < 1e-6);
        assert!(c0.dot(&c1).abs() < 1e-6);
        assert_eq!(fs.position(), env.state().position);
        let target = env.track().target_gate(env.progress().passed).unwrap();
        assert!((fs.to_gate() - (env.track().gates[target].center - env.state().position)).norm() < 1e-12);
        assert_eq!(obs.actor_vector(ObservationMode::State).len(), 32);
        assert_eq!(obs.critic_vector(ObservationMode::PixelSym).len(), 12);
        assert_eq!(obs.critic_vector(ObservationMode::PixelAsym).len(), 32);
    }
}

#[test]
fn timeout_after_1500_steps() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(true), 0, 0).unwrap();
    let start = QuadState::hovering(Vector3::new(-20.0, 10.0, 5.0), &QuadParams::default());
    env.reset_to(start, 0, QuadParams::default());
    let h = hover_action();
    for k in 1..=1500 {
        let r = env.step(h).unwrap();
        if k < 1500 {
            assert!(!r.done && r.done_reason.is_none());
        } else {
            assert_eq!(r.done_reason, Some(DoneReason::Timeout));
            assert!(r.done);
        }
    }
}

#[test]
fn ground_crash() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(true), 0, 0).unwrap();
    let mut start = QuadState::hovering(Vector3::new(-20.0, 10.0, 0.05), &QuadParams::default());
    start.velocity = Vector3::new(0.0, 0.0, -5.0);
    env.reset_to(start, 0, QuadParams::default());
    let r = env.step([-1.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(r.done_reason, Some(DoneReason::CrashGround));
    assert_eq!(r.breakdown.crash, 4.0);
    assert!(r.episode.is_some_and(|e| !e.success));
}

#[test]
fn gate_frame_crash() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(true), 0, 0).unwrap();
    // Aim at the top bar of gate 1.
    let mut start = QuadState::hovering(Vector3::new(4.9, 0.0, 2.85), &QuadParams::default());
    start.velocity = Vector3::new(5.0, 0.0, 0.0);
    env.reset_to(start, 1, QuadParams::default());
    let r = env.step(hover_action()).unwrap();
    assert_eq!(r.done_reason, Some(DoneReason::CrashGate));
    assert!(r.pass.is_none());
}

#[test]
fn acyclic_final_pass_adds_terminal_bonus() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(false), 0, 0).unwrap();
    let mut start = QuadState::hovering(Vector3::new(4.95, 0.1, 2.0), &QuadParams::default());
    start.velocity = Vector3::new(5.0, 0.0, 0.0);
    env.reset_to(start, 1, QuadParams::default());
    let r = env.step(hover_action()).unwrap();
    assert_eq!(r.done_reason, Some(DoneReason::FinishedAcyclic));
    let pass = r.pass.unwrap();
    assert_eq!(pass.gate, 1);
    assert!((r.breakdown.pass - (10.0 + 1.0 - pass.offset)).abs() < 1e-12);
    assert!(r.reward > 10.0);
    assert!(r.episode.unwrap().success);
}

#[test]
fn clean_pass_enters_buffer() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(true), 0, 0).unwrap();
    let mut start = QuadState::hovering(Vector3::new(-0.05, 0.0, 2.0), &QuadParams::default());
    start.velocity = Vector3::new(5.0, 0.0, 0.0);
    env.reset_to(start, 0, QuadParams::default());
    let r = env.step(hover_action()).unwrap();
    assert!(r.pass.is_some() && !r.done);
    assert_eq!(env.progress().passed, 1);
    let newest = env.buffer().slot(1).back().unwrap();
    assert_eq!(newest.state, *env.state());
    assert_eq!(newest.passed, 1);
    assert_eq!(env.buffer().slot(1).len(), 10);
}

#[test]
fn reward_matches_manual_recomputation() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::default()), mini(true), 9, 0).unwrap();
    env.reset();
    let h = hover_action();
    let mut prev_a = [0.0; 4];
    for k in 0..200 {
        let before = env.progress().clone();
        let target = env.track().target_gate(before.passed).unwrap();
        let a = [h[0] + 0.1 * (k as f64 * 0.3).sin(), 0.05, 0.0, 0.0];
        let r = env.step(a).unwrap();
        let gate = env.track().gates[target].center;
        let prog = 0.5 * (before.distance - (gate - env.state().position).norm());
        assert!((r.breakdown.progress - prog).abs() < 1e-12);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rate: f64 = a.iter().zip(prev_a).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((r.breakdown.command - (0.0005 * norm + 0.0002 * rate)).abs() < 1e-12);
        prev_a = a;
        if r.done {
            break;
        }
    }
}

#[test]
fn pixel_mode_renders_mask() {
    let mut env = RaceEnv::new(cfg(ObservationMode::PixelAsym, RandomizationSpec::none()), mini(false), 0, 0).unwrap();
    let obs = env.reset();
    let mask = obs.mask.expect("mask in pixel mode");
    assert!(mask.count_nonzero() > 0);
    let mut state_env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(false), 0, 0).unwrap();
    assert!(state_env.reset().mask.is_none());
}

#[test]
#[should_panic(expected = "finished episode")]
fn stepping_done_env_panics() {
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(true), 0, 0).unwrap();
    let _ = env.step([0.0; 4]);
}

fn trace(parallel: bool, n: usize, seed: u64, steps: usize) -> Vec<Vec<f64>> {
    let c = cfg(ObservationMode::State, RandomizationSpec::default());
    let mut v = VecEnv::new(c, mini(true), n, seed).unwrap().with_parallel(parallel);
    v.reset();
    let h = hover_action();
    (0..steps)
        .map(|t| {
            let acts: Vec<[f64; 4]> =
                (0..n).map(|i| [h[0] + 0.3 * ((t + i) as f64 * 0.1).sin(), 0.2 * (t as f64 * 0.05).cos(), 0.1, 0.0]).collect();
            v.step(&acts).unwrap().iter().map(|r| r.reward).collect()
        })
        .collect()
}

#[test]
fn vec_env_single_matches_scalar() {
    let c = cfg(ObservationMode::State, RandomizationSpec::default());
    let mut scalar = RaceEnv::new(c.clone(), mini(true), 4, 0).unwrap();
    let mut vec = VecEnv::new(c, mini(true), 1, 4).unwrap();
    assert_eq!(vec.reset()[0], scalar.reset());
    for t in 0..300 {
        let a = [0.1 * (t as f64).sin(), 0.1, -0.1, 0.0];
        let mut s = scalar.step(a).unwrap();
        if s.done {
            let fresh = scalar.reset();
            s.terminal_obs = Some(std::mem::replace(&mut s.obs, fresh));
        }
        assert_eq!(vec.step(&[a]).unwrap()[0], s);
    }
}

#[test]
fn vec_env_parallel_equals_sequential_and_repeats() {
    let a = trace(true, 16, 21, 200);
    assert_eq!(a, trace(false, 16, 21, 200));
    assert_eq!(a, trace(true, 16, 21, 200));
    assert_ne!(a, trace(true, 16, 22, 200));
}

#[test]
fn vec_env_count_mismatch() {
    let mut v = VecEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(true), 3, 0).unwrap();
    v.reset();
    assert!(matches!(v.step(&[[0.0; 4]; 2]), Err(crate::Error::CountMismatch { expected: 3, found: 2 })));
}

#[test]
fn episode_log_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut env = RaceEnv::new(cfg(ObservationMode::State, RandomizationSpec::none()), mini(true), 0, 0).unwrap();
    env.reset();
    let mut log = EpisodeLog::default();
    for _ in 0..5 {
        let r = env.step(hover_action()).unwrap();
        log.record(&env, hover_action(), &r);
    }
    let path = dir.path().join("ep.csv");
    log.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("t,px,py,pz,qw"));
    assert_eq!(text.lines().count(), 6);
}
