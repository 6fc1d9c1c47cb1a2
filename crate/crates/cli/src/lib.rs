//! Command implementations behind the `pixelrace` binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pixelrace::config::RunConfig;
use pixelrace::evalkit::{
    displacement_grid, evaluate, sensitivity_sweep, write_report_csv, write_summary_csv, write_sweep_csv,
    AgentController, ConstantAction, EvalReport, ScriptedPilot,
};
use pixelrace::gatecam::{level_pose, mask_render_benchmark, MaskRenderer};
use pixelrace::ppo::{train, Agent, TrainOptions};
use pixelrace::quadsim::{self, Action, QuadState};
use pixelrace::raceenv::ObservationMode;
use pixelrace::track::Track;
use pixelrace::Error;

/// Built-in seven-gate scene used by `bench` when no track is given.
pub const BENCH_TRACK: &str = include_str!("../../../tracks/ellipse.toml");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFiniteLoss(_) | Error::NonFiniteState => CliError::Numerical(e.to_string()),
            Error::Config { .. } | Error::InvalidParam { .. } | Error::InvalidTrack(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "pixelrace", version, about = "Quadrotor racing from gate-edge pixels")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides shared by every subcommand. Flags win over environment
/// variables, which win over the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration file (TOML).
    #[arg(long, global = true, env = "PIXELRACE_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "PIXELRACE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per logical core.
    #[arg(long, global = true, env = "PIXELRACE_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, global = true, env = "PIXELRACE_TRACK")]
    pub track: Option<PathBuf>,
    #[arg(long, global = true, env = "PIXELRACE_MODE")]
    pub mode: Option<ObservationMode>,
    /// Output directory.
    #[arg(long, global = true, env = "PIXELRACE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy with PPO.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a scripted controller.
    Eval(EvalArgs),
    /// Gate-displacement sensitivity sweep.
    Sweep(SweepArgs),
    /// Render gate-edge masks to binary PGM files.
    RenderObs(RenderArgs),
    /// Mask-render and dynamics throughput.
    Bench(BenchArgs),
    /// List, validate or print track files.
    Tracks(TracksArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Environment-step budget.
    #[arg(long, env = "PIXELRACE_STEPS")]
    pub steps: Option<u64>,
    /// Start from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BuiltinController {
    /// Center-line follower with access to the true state.
    Scripted,
    /// Zero thrust: falls to the ground.
    Ground,
    /// Level hover command.
    Hover,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, env = "PIXELRACE_CHECKPOINT", conflicts_with = "controller")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub controller: Option<BuiltinController>,
    #[arg(long)]
    pub rollouts: Option<usize>,
    /// Control steps per rollout.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub laps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Largest displacement bound, m.
    #[arg(long, default_value_t = 0.5)]
    pub max_displacement: f64,
    /// Nonzero grid points per axis and sign.
    #[arg(long, default_value_t = 5)]
    pub grid_steps: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Body pose as x,y,z,yaw_deg (level attitude).
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub pose: Option<[f64; 4]>,
    /// Render from the track's start pose.
    #[arg(long, conflicts_with = "pose")]
    pub at_start: bool,
    /// Episode-log CSV (columns px,py,pz,qw,qx,qy,qz); writes one frame per row.
    #[arg(long, conflicts_with_all = ["pose", "at_start"])]
    pub trajectory: Option<PathBuf>,
    /// Corrupted share of sub-segments; defaults to the config value.
    #[arg(long)]
    pub corruption: Option<f64>,
    /// Output file, or directory for a trajectory. Defaults under --out.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    /// Rigid-body integration steps timed on one thread.
    #[arg(long, default_value_t = 200_000)]
    pub dynamics_steps: usize,
}

#[derive(Debug, Args)]
pub struct TracksArgs {
    #[command(subcommand)]
    pub action: TracksAction,
}

#[derive(Debug, Subcommand)]
pub enum TracksAction {
    /// Summarize every track file in a directory.
    List {
        #[arg(long, default_value = "tracks")]
        dir: PathBuf,
    },
    /// Check track files; all files in `tracks/` when none are given.
    Validate { paths: Vec<PathBuf> },
    /// Print a track in canonical form.
    Show { path: PathBuf },
}

fn parse_pose(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z, yaw] if v.iter().all(|c| c.is_finite()) => Ok([*x, *y, *z, *yaw]),
        _ => Err("expected four finite numbers x,y,z,yaw_deg".into()),
    }
}

/// Entry point used by `main`.
pub fn run_from_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    let cfg = resolve_config(&cli.common)?;
    if let Some(n) = cfg.workers {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Train(a) => cmd_train(cfg, &a),
        Command::Eval(a) => cmd_eval(cfg, &cli.common, &a),
        Command::Sweep(a) => cmd_sweep(cfg, &cli.common, &a),
        Command::RenderObs(a) => cmd_render_obs(cfg, &a),
        Command::Bench(a) => cmd_bench(cfg, &cli.common, &a),
        Command::Tracks(a) => cmd_tracks(cfg, &a),
    }
}

/// Defaults, then the config file, then environment and flag overrides.
pub fn resolve_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.resolve(Path::new(""))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
        cfg.eval.seed = s;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    if let Some(t) = &common.track {
        cfg.track = t.clone();
    }
    if let Some(m) = common.mode {
        cfg.env.mode = m;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn print_config(cfg: &RunConfig) -> CliResult {
    let text = cfg.to_toml_string()?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "# resolved config")?;
    writeln!(out, "{}", text.trim_end())?;
    writeln!(out, "# end config")?;
    Ok(())
}

fn load_track(path: &Path) -> CliResult<Track> {
    Track::load(path).map_err(|e| CliError::Usage(format!("track {}: {e}", path.display())))
}

/// Step count encoded in a `ckpt-<steps>.ckpt` file name.
pub fn checkpoint_steps(path: &Path) -> Option<u64> {
    path.file_stem()?.to_str()?.strip_prefix("ckpt-")?.parse().ok()
}

fn cmd_train(mut cfg: RunConfig, args: &TrainArgs) -> CliResult {
    if let Some(s) = args.steps {
        cfg.ppo.total_steps = s;
    }
    cfg.validate()?;
    // Absolute track path so the snapshot replays from any directory.
    cfg.track = std::fs::canonicalize(&cfg.track)
        .map_err(|e| CliError::Usage(format!("track {}: {e}", cfg.track.display())))?;
    let track = Arc::new(load_track(&cfg.track)?);
    print_config(&cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    cfg.write_snapshot(cfg.out.join("config.toml"))?;
    let opts = TrainOptions {
        seed: cfg.seed,
        out_dir: Some(cfg.out.clone()),
        resume: args.resume.clone(),
        start_steps: args.resume.as_deref().and_then(checkpoint_steps).unwrap_or(0),
        parallel: true,
    };
    let t0 = Instant::now();
    let mut progress = |row: &pixelrace::ppo::CurveRow| {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        eprintln!(
            "steps {:>10}  reward {:>8}  len {:>7}  sr {:>5}  kl {:.4}  {:.0}s",
            row.env_steps,
            fmt(row.mean_ep_reward),
            fmt(row.mean_ep_len),
            fmt(row.sr_rolling),
            row.kl,
            t0.elapsed().as_secs_f64()
        );
    };
    let outcome = train(track, cfg.env.clone(), &cfg.ppo, &opts, &mut progress)?;
    println!("trained {} updates into {}", outcome.curve.len(), cfg.out.display());
    Ok(())
}

fn apply_policy_args(cfg: &mut RunConfig, p: &PolicyArgs) {
    if let Some(n) = p.rollouts {
        cfg.eval.n_rollouts = n;
    }
    if let Some(n) = p.max_steps {
        cfg.eval.steps = n;
    }
    if let Some(n) = p.laps {
        cfg.eval.laps = n;
    }
}

enum Policy {
    Agent(Arc<Agent>),
    Builtin(BuiltinController),
}

fn load_policy(cfg: &RunConfig, p: &PolicyArgs) -> CliResult<Policy> {
    match (&p.checkpoint, p.controller) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(CliError::Runtime(format!("missing checkpoint {}", path.display())));
            }
            Ok(Policy::Agent(Arc::new(Agent::load(cfg.env.mode, path)?)))
        }
        (None, Some(c)) => Ok(Policy::Builtin(c)),
        (None, None) => Err(CliError::Usage("give --checkpoint or --controller".into())),
    }
}

fn policy_label(p: &PolicyArgs) -> String {
    match (&p.checkpoint, p.controller) {
        (Some(path), _) => path.file_name().map_or("policy".into(), |n| n.to_string_lossy().into_owned()),
        (None, Some(c)) => format!("{c:?}").to_lowercase(),
        (None, None) => "policy".into(),
    }
}

fn run_eval(policy: &Policy, track: &Track, cfg: &RunConfig) -> CliResult<EvalReport> {
    let (env, eval) = (&cfg.env, &cfg.eval);
    let report = match policy {
        Policy::Agent(a) => evaluate(|| AgentController(a.clone()), track, env, eval)?,
        Policy::Builtin(BuiltinController::Scripted) => {
            evaluate(|| ScriptedPilot::new(track, eval.laps, env.params.clone()), track, env, eval)?
        }
        Policy::Builtin(BuiltinController::Ground) => evaluate(|| ConstantAction([-1.0, 0.0, 0.0, 0.0]), track, env, eval)?,
        Policy::Builtin(BuiltinController::Hover) => {
            let a = Action::hover(&env.params).to_normalized(&env.params);
            evaluate(|| ConstantAction(a), track, env, eval)?
        }
    };
    Ok(report)
}

fn cmd_eval(mut cfg: RunConfig, _common: &Common, args: &EvalArgs) -> CliResult {
    apply_policy_args(&mut cfg, &args.policy);
    cfg.validate()?;
    let track = load_track(&cfg.track)?;
    let policy = load_policy(&cfg, &args.policy)?;
    print_config(&cfg)?;
    let report = run_eval(&policy, &track, &cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    write_report_csv(&report, cfg.out.join("eval.csv"))?;
    write_summary_csv(&report, cfg.out.join("eval_summary.csv"))?;
    println!("{}", report.summary(&format!("{} on {}", policy_label(&args.policy), track.name)));
    Ok(())
}

fn cmd_sweep(mut cfg: RunConfig, _common: &Common, args: &SweepArgs) -> CliResult {
    apply_policy_args(&mut cfg, &args.policy);
    cfg.validate()?;
    if !(args.max_displacement >= 0.0 && args.max_displacement.is_finite()) || args.grid_steps == 0 {
        return Err(CliError::Usage("--max-displacement must be >= 0 and --grid-steps positive".into()));
    }
    let track = load_track(&cfg.track)?;
    let policy = load_policy(&cfg, &args.policy)?;
    print_config(&cfg)?;
    let grid = displacement_grid(args.max_displacement, args.grid_steps);
    let (env, eval) = (&cfg.env, &cfg.eval);
    let rows = match &policy {
        Policy::Agent(a) => sensitivity_sweep(|| AgentController(a.clone()), &track, env, eval, &grid)?,
        Policy::Builtin(BuiltinController::Scripted) => {
            sensitivity_sweep(|| ScriptedPilot::new(&track, eval.laps, env.params.clone()), &track, env, eval, &grid)?
        }
        Policy::Builtin(BuiltinController::Ground) => {
            sensitivity_sweep(|| ConstantAction([-1.0, 0.0, 0.0, 0.0]), &track, env, eval, &grid)?
        }
        Policy::Builtin(BuiltinController::Hover) => {
            let a = Action::hover(&env.params).to_normalized(&env.params);
            sensitivity_sweep(|| ConstantAction(a), &track, env, eval, &grid)?
        }
    };
    std::fs::create_dir_all(&cfg.out)?;
    write_sweep_csv(&rows, cfg.out.join("sweep.csv"))?;
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    println!("{:<5} {:>6} {:>8} {:>8} {:>8}", "axis", "d [m]", "SR [%]", "MGE [m]", "LT [s]");
    for r in &rows {
        let sign = if r.sign > 0.0 { '+' } else { '-' };
        println!(
            "{sign}{:<4} {:>6.3} {:>8.1} {:>8} {:>8}",
            format!("{:?}", r.axis).to_lowercase(),
            r.displacement,
            r.sr,
            opt(r.mge),
            opt(r.lt)
        );
    }
    Ok(())
}

/// Mask seen from the start pose of `track`, as written by
/// `render-obs --at-start`.
pub fn render_at_start(track: &Track, cfg: &RunConfig, corruption: f64) -> Vec<u8> {
    let pose = level_pose(track.start.position, track.start.yaw_deg);
    render_pgm(track, cfg, corruption, &pose, cfg.seed)
}

fn renderer(cfg: &RunConfig, corruption: f64) -> MaskRenderer {
    MaskRenderer::new(cfg.env.intrinsics.clone(), cfg.env.extrinsics.clone()).with_corruption(corruption)
}

fn render_pgm(track: &Track, cfg: &RunConfig, corruption: f64, pose: &Isometry3<f64>, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    renderer(cfg, corruption).render(&track.gates, pose, &mut rng).to_pgm()
}

fn read_trajectory(path: &Path) -> CliResult<Vec<Isometry3<f64>>> {
    let bad = |m: String| CliError::Usage(format!("trajectory {}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let cols = ["px", "py", "pz", "qw", "qx", "qy", "qz"]
        .map(|c| headers.iter().position(|h| h == c).ok_or_else(|| bad(format!("missing column {c}"))));
    let mut idx = [0usize; 7];
    for (k, c) in cols.into_iter().enumerate() {
        idx[k] = c?;
    }
    let mut poses = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let mut v = [0.0; 7];
        for k in 0..7 {
            v[k] = rec
                .get(idx[k])
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("row {}: bad number", line + 1)))?;
        }
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        if q.norm() < 1e-9 {
            return Err(bad(format!("row {}: zero quaternion", line + 1)));
        }
        poses.push(Isometry3::from_parts(Translation3::new(v[0], v[1], v[2]), UnitQuaternion::from_quaternion(q)));
    }
    Ok(poses)
}

fn cmd_render_obs(cfg: RunConfig, args: &RenderArgs) -> CliResult {
    cfg.validate()?;
    let corruption = args.corruption.unwrap_or(cfg.env.corruption_frac);
    if !(0.0..=1.0).contains(&corruption) {
        return Err(CliError::Usage("--corruption must lie in [0, 1]".into()));
    }
    let track = load_track(&cfg.track)?;
    print_config(&cfg)?;
    if let Some(traj) = &args.trajectory {
        let poses = read_trajectory(traj)?;
        let dir = args.output.clone().unwrap_or_else(|| cfg.out.join("frames"));
        std::fs::create_dir_all(&dir)?;
        for (i, pose) in poses.iter().enumerate() {
            let seed = cfg.seed.wrapping_add(i as u64);
            std::fs::write(dir.join(format!("frame_{i:05}.pgm")), render_pgm(&track, &cfg, corruption, pose, seed))?;
        }
        println!("wrote {} frames to {}", poses.len(), dir.display());
        return Ok(());
    }
    let pose = match (args.pose, args.at_start) {
        (Some([x, y, z, yaw]), _) => level_pose(Vector3::new(x, y, z), yaw),
        (None, true) => level_pose(track.start.position, track.start.yaw_deg),
        (None, false) => return Err(CliError::Usage("give --pose, --at-start or --trajectory".into())),
    };
    let path = match &args.output {
        Some(p) => p.clone(),
        None => {
            std::fs::create_dir_all(&cfg.out)?;
            cfg.out.join("obs.pgm")
        }
    };
    std::fs::write(&path, render_pgm(&track, &cfg, corruption, &pose, cfg.seed))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Mask-render timing on `track` from its start pose, in microseconds.
pub fn bench_masks(track: &Track, cfg: &RunConfig, iterations: usize) -> pixelrace::gatecam::BenchReport {
    let pose = level_pose(track.start.position, track.start.yaw_deg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    mask_render_benchmark(&renderer(cfg, cfg.env.corruption_frac), &track.gates, &pose, iterations, &mut rng)
}

/// Single-threaded rigid-body steps per second at the integrator substep.
pub fn bench_dynamics(cfg: &RunConfig, steps: usize) -> CliResult<f64> {
    let params = &cfg.env.params;
    let h = cfg.env.dt / cfg.env.substeps as f64;
    let hover = Action::hover(params);
    let mut state = QuadState::hovering(Vector3::new(0.0, 0.0, 2.0), params);
    let t0 = Instant::now();
    for _ in 0..steps {
        state = quadsim::step(&state, &hover, params, &cfg.env.gains, h)?;
    }
    std::hint::black_box(&state);
    Ok(steps as f64 / t0.elapsed().as_secs_f64().max(1e-12))
}

fn cmd_bench(cfg: RunConfig, common: &Common, args: &BenchArgs) -> CliResult {
    cfg.validate()?;
    let track = match &common.track {
        Some(p) => load_track(p)?,
        None => Track::from_toml_str(BENCH_TRACK)?,
    };
    print_config(&cfg)?;
    let rep = bench_masks(&track, &cfg, args.iterations);
    println!(
        "mask render ({} gates, {} frames): mean {:.1} us/frame, p99 {:.1} us/frame",
        track.n_gates(),
        rep.iterations,
        rep.mean_us,
        rep.p99_us
    );
    let rate = bench_dynamics(&cfg, args.dynamics_steps.max(1))?;
    println!("dynamics: {rate:.0} steps/s single-thread (dt {:.4} s)", cfg.env.dt / cfg.env.substeps as f64);
    Ok(())
}

fn track_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_tracks(cfg: RunConfig, args: &TracksArgs) -> CliResult {
    print_config(&cfg)?;
    match &args.action {
        TracksAction::List { dir } => {
            for path in track_files(dir)? {
                match Track::load(&path) {
                    Ok(t) => println!(
                        "{:<12} {:>2} gates  {:<7}  {}",
                        t.name,
                        t.n_gates(),
                        if t.cyclic { "cyclic" } else { "acyclic" },
                        path.display()
                    ),
                    Err(e) => println!("{:<12} invalid: {e}", path.display()),
                }
            }
            Ok(())
        }
        TracksAction::Validate { paths } => {
            let paths = if paths.is_empty() { track_files(Path::new("tracks"))? } else { paths.clone() };
            let mut failed = 0;
            for path in &paths {
                match Track::load(path) {
                    Ok(t) => println!("ok       {} ({}, {} gates)", path.display(), t.name, t.n_gates()),
                    Err(e) => {
                        failed += 1;
                        println!("invalid  {}: {e}", path.display());
                    }
                }
            }
            if failed > 0 {
                return Err(CliError::Usage(format!("{failed} of {} track files invalid", paths.len())));
            }
            Ok(())
        }
        TracksAction::Show { path } => {
            print!("{}", load_track(path)?.to_toml_string());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_names_carry_step_counts() {
        assert_eq!(checkpoint_steps(Path::new("runs/a/ckpt-0000025000.ckpt")), Some(25_000));
        assert_eq!(checkpoint_steps(Path::new("ckpt-final.ckpt")), None);
        assert_eq!(checkpoint_steps(Path::new("policy.ckpt")), None);
    }
}
