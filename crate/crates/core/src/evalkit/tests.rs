use std::sync::Arc;

use nalgebra::Vector3;

use super::*;
use crate::raceenv::{EnvConfig, PassEvent};
use crate::track::{Gate, Track};

fn mini() -> Track {
    Track::from_toml_str(include_str!("../../../../tracks/mini.toml")).unwrap()
}

fn square() -> Track {
    let gates = vec![
        Gate::new(Vector3::new(0.0, 0.0, 2.0), 0.0, 1.5, 0.2),
        Gate::new(Vector3::new(4.0, 4.0, 2.0), 90.0, 1.5, 0.2),
        Gate::new(Vector3::new(0.0, 8.0, 2.0), 180.0, 1.5, 0.2),
        Gate::new(Vector3::new(-4.0, 4.0, 2.0), 270.0, 1.5, 0.2),
    ];
    Track::new("square", gates, true, None).unwrap()
}

fn pass(gate: usize, offset: f64, time: f64) -> PassEvent {
    PassEvent { gate, offset, time }
}

#[test]
fn center_line_oracle_is_perfect() {
    for (track, laps) in [(mini(), 1), (square(), 3)] {
        let path = sample_path(&center_line(&track, laps), 4.0, 0.02);
        let rec = kinematic_rollout(&track, &path, 0.02, laps);
        let report = EvalReport::from_records(vec![rec]);
        assert_eq!(report.sr, 100.0, "{}", track.name);
        assert!(report.mge.unwrap() < 1e-6);
        assert!(report.lt.unwrap() > 0.0);
        assert_eq!(report.rollouts[0].lap_times.len() as u64, if track.cyclic { laps } else { 1 });
    }
}

#[test]
fn path_through_a_frame_crashes() {
    let track = mini();
    let path = sample_path(&[Vector3::new(-3.0, 0.0, 2.8), Vector3::new(3.0, 0.0, 2.8)], 4.0, 0.02);
    assert_eq!(kinematic_rollout(&track, &path, 0.02, 1).outcome, Outcome::Crash);
}

#[test]
fn hand_built_log_metrics() {
    let rec = RolloutRecord {
        outcome: Outcome::Timeout,
        passes: vec![pass(0, 0.1, 1.0), pass(1, 0.2, 2.0), pass(2, 0.3, 3.0)],
        lap_times: vec![],
        steps: 10,
    };
    let report = EvalReport::from_records(vec![rec]);
    assert_eq!(report.mge, Some(0.2));
    assert_eq!(report.sr, 0.0);
    assert_eq!(report.lt, None);
    assert!(report.summary("x").contains(" -"));
}

#[test]
fn lap_times_follow_sequence_completions() {
    let passes: Vec<_> = (0..6).map(|k| pass(k % 2, 0.0, 1.0 + k as f64)).collect();
    assert_eq!(lap_times(&passes, 2), vec![2.0, 2.0, 2.0]);
    assert_eq!(lap_times(&passes[..5], 3), vec![3.0]);
}

#[test]
fn ground_crash_policy_scores_zero() {
    let cfg = EvalConfig { n_rollouts: 8, ..EvalConfig::default() };
    let report = evaluate(|| ConstantAction([-1.0, 0.0, 0.0, 0.0]), &mini(), &EnvConfig::default(), &cfg).unwrap();
    assert_eq!(report.sr, 0.0);
    assert_eq!(report.lt, None);
    assert_eq!(report.crash_pct, 100.0);
}

#[test]
fn scripted_pilot_flies_the_tracks() {
    let env = EnvConfig::default();
    let cfg = EvalConfig { n_rollouts: 16, ..EvalConfig::default() };
    for track in [mini(), square()] {
        let report = evaluate(|| ScriptedPilot::new(&track, cfg.laps, env.params.clone()), &track, &env, &cfg).unwrap();
        assert_eq!(report.sr, 100.0, "{}: {report}", track.name);
        assert!((report.sr + report.crash_pct + report.timeout_pct - 100.0).abs() < 1e-12);
        let offs: Vec<f64> = report.rollouts.iter().flat_map(|r| r.passes.iter().map(|p| p.offset)).collect();
        assert!((report.mge.unwrap() - offs.iter().sum::<f64>() / offs.len() as f64).abs() < 1e-9);
        let again = evaluate(|| ScriptedPilot::new(&track, cfg.laps, env.params.clone()), &track, &env, &cfg).unwrap();
        assert_eq!(report, again);
    }
}

#[test]
fn zero_displacement_reproduces_evaluate() {
    let env = EnvConfig::default();
    let track = mini();
    let cfg = EvalConfig { n_rollouts: 8, ..EvalConfig::default() };
    let make = || ScriptedPilot::new(&track, 1, env.params.clone());
    let plain = evaluate(make, &track, &env, &cfg).unwrap();
    let rows = sensitivity_sweep(make, &track, &env, &cfg, &[0.0]).unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert_eq!((r.sr, r.mge, r.lt), (plain.sr, plain.mge, plain.lt));
    }
}

#[test]
fn open_loop_replay_degrades_with_displacement() {
    let env = EnvConfig::default();
    let track = mini();
    let mut pilot = ScriptedPilot::new(&track, 1, env.params.clone());
    let actions = Arc::new(record_actions(&mut pilot, &track, &env, 400).unwrap());
    let cfg = EvalConfig { n_rollouts: 32, ..EvalConfig::default() };
    let grid = displacement_grid(1.5, 5);
    let rows = sensitivity_sweep(|| Replay::new(actions.clone()), &track, &env, &cfg, &grid).unwrap();
    assert_eq!(rows.len(), 36);
    for panel in rows.chunks(grid.len()) {
        for w in panel.windows(2) {
            assert!(w[1].sr <= w[0].sr, "{:?} {} -> {}", w[0].axis, w[0].sr, w[1].sr);
        }
    }
    assert_eq!(rows[0].sr, 100.0);
    assert!(rows.iter().any(|r| r.sr < 100.0));
}

#[test]
fn csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let env = EnvConfig::default();
    let track = mini();
    let cfg = EvalConfig { n_rollouts: 4, ..EvalConfig::default() };
    let report = evaluate(|| ConstantAction([-1.0, 0.0, 0.0, 0.0]), &track, &env, &cfg).unwrap();
    write_report_csv(&report, dir.path().join("r.csv")).unwrap();
    write_summary_csv(&report, dir.path().join("s.csv")).unwrap();
    let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(s, "sr,mge,lt,crash_pct,timeout_pct,rollouts\n0.0,,,100.0,0.0,4\n");
    let r = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(r.lines().count(), 5);
}
