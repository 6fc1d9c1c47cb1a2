use std::sync::Arc;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{BufferEntry, InitialStateBuffer};
use super::reward::{camera_angle, reward, RewardBreakdown, RewardConfig, RewardInputs};
use crate::error::{Error, Result};
use crate::gatecam::{CameraExtrinsics, CameraIntrinsics, GateMask, MaskRenderer, DEFAULT_CORRUPTION};
use crate::quadsim::{self, symmetric, Action, QuadParams, QuadState, RandomizationSpec, RateGains};
use crate::track::{detect_gate_collision, detect_gate_pass, randomize_gates, ProgressState, Track, DRONE_RADIUS};

/// Number of stored past actions.
pub const HISTORY_LEN: usize = 3;
/// Length of the flattened action history.
pub const HISTORY_DIM: usize = 4 * HISTORY_LEN;
/// Length of [`FullSimState`].
pub const STATE_DIM: usize = 20;

/// What the actor and critic observe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationMode {
    /// Both networks see the simulator state; no mask is rendered.
    #[default]
    State,
    /// Both networks see only the mask and the action history.
    PixelSym,
    /// The actor sees the mask, the critic also gets the simulator state.
    PixelAsym,
}

impl ObservationMode {
    pub fn uses_mask(self) -> bool {
        !matches!(self, Self::State)
    }

    /// Length of the non-image actor input.
    pub fn actor_vector_dim(self) -> usize {
        match self {
            Self::State => HISTORY_DIM + STATE_DIM,
            _ => HISTORY_DIM,
        }
    }

    /// Length of the non-image critic input.
    pub fn critic_vector_dim(self) -> usize {
        match self {
            Self::PixelSym => HISTORY_DIM,
            _ => HISTORY_DIM + STATE_DIM,
        }
    }
}

impl std::str::FromStr for ObservationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "state" => Ok(Self::State),
            "pixel-sym" => Ok(Self::PixelSym),
            "pixel-asym" => Ok(Self::PixelAsym),
            other => Err(Error::InvalidParam {
                name: "mode",
                reason: format!("unknown mode {other:?}; expected state, pixel-sym or pixel-asym"),
            }),
        }
    }
}

impl std::fmt::Display for ObservationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::State => "state",
            Self::PixelSym => "pixel-sym",
            Self::PixelAsym => "pixel-asym",
        })
    }
}

/// Privileged simulator state: position, first two rotation columns,
/// velocity, body rates, encoded gate index and vector to the next gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullSimState(pub [f64; STATE_DIM]);

impl FullSimState {
    pub fn new(state: &QuadState, progress: &ProgressState, n_gates: usize) -> Self {
        let r = state.rotation();
        let enc = progress.encoded(n_gates);
        let mut s = [0.0; STATE_DIM];
        s[0..3].copy_from_slice(state.position.as_slice());
        s[3..6].copy_from_slice(r.column(0).as_slice());
        s[6..9].copy_from_slice(r.column(1).as_slice());
        s[9..12].copy_from_slice(state.velocity.as_slice());
        s[12..15].copy_from_slice(state.body_rates.as_slice());
        s[15..17].copy_from_slice(&enc);
        s[17..20].copy_from_slice(progress.to_next.as_slice());
        Self(s)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn rotation_columns(&self) -> (Vector3<f64>, Vector3<f64>) {
        (Vector3::from_row_slice(&self.0[3..6]), Vector3::from_row_slice(&self.0[6..9]))
    }

    pub fn gate_encoding(&self) -> [f64; 2] {
        [self.0[15], self.0[16]]
    }

    pub fn to_gate(&self) -> Vector3<f64> {
        Vector3::from_row_slice(&self.0[17..20])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Gate-edge mask; `None` in state mode.
    pub mask: Option<GateMask>,
    /// Last three normalized actions, newest last.
    pub history: [f64; HISTORY_DIM],
    pub full_state: FullSimState,
}

impl Observation {
    /// Non-image actor input for `mode`.
    pub fn actor_vector(&self, mode: ObservationMode) -> Vec<f32> {
        let mut v: Vec<f32> = self.history.iter().map(|&x| x as f32).collect();
        if mode == ObservationMode::State {
            v.extend(self.full_state.0.iter().map(|&x| x as f32));
        }
        v
    }

    /// Non-image critic input for `mode`.
    pub fn critic_vector(&self, mode: ObservationMode) -> Vec<f32> {
        let mut v: Vec<f32> = self.history.iter().map(|&x| x as f32).collect();
        if mode != ObservationMode::PixelSym {
            v.extend(self.full_state.0.iter().map(|&x| x as f32));
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    CrashGround,
    CrashGate,
    Timeout,
    FinishedAcyclic,
}

impl DoneReason {
    /// Whether the value after this step is zero, as opposed to a truncation.
    pub fn is_terminal(self) -> bool {
        !matches!(self, Self::Timeout)
    }

    pub fn is_crash(self) -> bool {
        matches!(self, Self::CrashGround | Self::CrashGate)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CrashGround => "crash_ground",
            Self::CrashGate => "crash_gate",
            Self::Timeout => "timeout",
            Self::FinishedAcyclic => "finished_acyclic",
        }
    }
}

/// A completed gate crossing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassEvent {
    pub gate: usize,
    /// In-plane distance from the gate center, m.
    pub offset: f64,
    /// Time of the crossing since episode start, s.
    pub time: f64,
}

/// Totals for a finished episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    pub length: usize,
    pub gates_passed: u64,
    pub reason: DoneReason,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub done: bool,
    pub done_reason: Option<DoneReason>,
    pub pass: Option<PassEvent>,
    pub episode: Option<EpisodeSummary>,
    /// Observation at the end of the finished episode when `obs` already
    /// belongs to a fresh one.
    pub terminal_obs: Option<Observation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub mode: ObservationMode,
    pub reward: RewardConfig,
    pub randomization: RandomizationSpec,
    pub params: QuadParams,
    pub gains: RateGains,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub corruption_frac: f64,
    /// Control period, s.
    pub dt: f64,
    /// Integrator substeps per control period.
    pub substeps: usize,
    pub max_steps: usize,
    pub buffer_capacity: usize,
    /// Forward speed of the buffer seed states, m/s.
    pub seed_speed: f64,
    /// Extra clearance beyond the drone radius required for buffer admission, m.
    pub buffer_margin: f64,
    /// Cyclic tracks count an episode as successful after this many laps.
    pub success_laps: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            mode: ObservationMode::default(),
            reward: RewardConfig::default(),
            randomization: RandomizationSpec::default(),
            params: QuadParams::default(),
            gains: RateGains::default(),
            intrinsics: CameraIntrinsics::default(),
            extrinsics: CameraExtrinsics::default(),
            corruption_frac: DEFAULT_CORRUPTION,
            dt: 0.02,
            substeps: 4,
            max_steps: 1500,
            buffer_capacity: 10,
            seed_speed: 2.0,
            buffer_margin: 0.15,
            success_laps: 1,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParam { name, reason: reason.into() });
        self.params.validate()?;
        self.randomization.validate()?;
        self.intrinsics.validate()?;
        let r = &self.reward;
        let weights = [
            r.lambda1,
            r.lambda2,
            r.lambda3,
            r.lambda4,
            r.pass_base,
            r.crash_penalty,
            r.terminal_reward_acyclic,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("reward", "all reward constants must be finite and >= 0");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", "must be positive");
        }
        if self.substeps == 0 {
            return bad("substeps", "must be at least 1");
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be at least 1");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.corruption_frac) {
            return bad("corruption_frac", "must lie in [0, 1]");
        }
        Ok(())
    }

    /// Largest crossing offset that admits a state into the buffer.
    pub fn admission_offset(&self, inner_side: f64) -> f64 {
        0.5 * inner_side - DRONE_RADIUS - self.buffer_margin
    }
}

/// One racing environment with its own random stream, buffer and
/// randomized copy of the track.
#[derive(Clone, Debug)]
pub struct RaceEnv {
    cfg: Arc<EnvConfig>,
    base_track: Arc<Track>,
    track: Track,
    renderer: MaskRenderer,
    buffer: InitialStateBuffer,
    rng: ChaCha8Rng,
    params: QuadParams,
    state: QuadState,
    progress: ProgressState,
    history: [f64; HISTORY_DIM],
    steps: usize,
    episode_reward: f64,
    done: bool,
}

impl RaceEnv {
    /// Creates an environment whose random stream is `(seed, stream)`.
    /// Call [`RaceEnv::reset`] before stepping.
    pub fn new(cfg: Arc<EnvConfig>, track: Arc<Track>, seed: u64, stream: u64) -> Result<Self> {
        cfg.validate()?;
        track.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let buffer = InitialStateBuffer::new(&track, &cfg.params, cfg.buffer_capacity, cfg.seed_speed);
        let renderer = MaskRenderer::new(cfg.intrinsics.clone(), cfg.extrinsics.clone()).with_corruption(cfg.corruption_frac);
        let state = QuadState::hovering(track.start.position, &cfg.params);
        let progress = ProgressState::new(&track, 0, &state.position);
        Ok(Self {
            params: cfg.params.clone(),
            track: (*track).clone(),
            cfg,
            base_track: track,
            renderer,
            buffer,
            rng,
            state,
            progress,
            history: [0.0; HISTORY_DIM],
            steps: 0,
            episode_reward: 0.0,
            done: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// The randomized track of the current episode.
    pub fn track(&self) -> &Track {
        &self.track
    }

    pub fn state(&self) -> &QuadState {
        &self.state
    }

    pub fn params(&self) -> &QuadParams {
        &self.params
    }

    pub fn progress(&self) -> &ProgressState {
        &self.progress
    }

    pub fn buffer(&self) -> &InitialStateBuffer {
        &self.buffer
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Time since episode start, s.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dt
    }

    /// Starts a training episode from a perturbed buffer entry with fresh
    /// dynamics and gate randomization.
    pub fn reset(&mut self) -> Observation {
        let spec = self.cfg.randomization.clone();
        let entry = self.buffer.sample(&mut self.rng).clone();
        self.params = quadsim::randomize(&self.cfg.params, &spec, &mut self.rng);
        self.track = randomize_gates(&self.base_track, spec.gate_offset, &mut self.rng);
        let state = perturb(&entry.state, &spec, &self.params, &mut self.rng);
        self.begin(state, entry.passed)
    }

    /// Starts an episode from an explicit state with the given parameters
    /// and the un-randomized track.
    pub fn reset_to(&mut self, state: QuadState, passed: u64, params: QuadParams) -> Observation {
        self.params = params;
        self.track = (*self.base_track).clone();
        self.begin(state, passed)
    }

    fn begin(&mut self, state: QuadState, passed: u64) -> Observation {
        self.state = state;
        self.progress = ProgressState::new(&self.track, passed, &self.state.position);
        self.history = [0.0; HISTORY_DIM];
        self.steps = 0;
        self.episode_reward = 0.0;
        self.done = false;
        self.observe()
    }

    /// Current observation. Renders a mask in pixel modes, which consumes
    /// random numbers for the segment corruption.
    pub fn observe(&mut self) -> Observation {
        let mask = self.cfg.mode.uses_mask().then(|| {
            let pose = body_pose(&self.state);
            self.renderer.render(&self.track.gates, &pose, &mut self.rng)
        });
        Observation {
            mask,
            history: self.history,
            full_state: FullSimState::new(&self.state, &self.progress, self.track.n_gates()),
        }
    }

    /// Advances one control period with a normalized action in `[-1, 1]^4`.
    ///
    /// # Panics
    ///
    /// When the episode is already done.
    pub fn step(&mut self, action: [f64; 4]) -> Result<StepResult> {
        assert!(!self.done, "step called on a finished episode; reset first");
        let action = action.map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) });
        let prev_action: [f64; 4] = self.history[HISTORY_DIM - 4..].try_into().expect("4 values");
        let command = Action::from_normalized(action, &self.params);

        let prev_pos = self.state.position;
        let target = self.track.target_gate(self.progress.passed).expect("target exists while running");
        let prev_distance = self.progress.distance;

        let h = self.cfg.dt / self.cfg.substeps as f64;
        let mut state = self.state.clone();
        for _ in 0..self.cfg.substeps {
            state = quadsim::step(&state, &command, &self.params, &self.cfg.gains, h)?;
        }
        self.state = state;
        self.steps += 1;
        let pos = self.state.position;
        let curr_distance = (self.track.gates[target].center - pos).norm();

        let ground = pos.z < 0.0;
        let gate_hit = !ground && detect_gate_collision(&prev_pos, &pos, DRONE_RADIUS, &self.track.gates);
        let crash = ground || gate_hit;
        let crossing = if crash { None } else { detect_gate_pass(&prev_pos, &pos, &self.track.gates[target]) };

        let mut pass = None;
        if let Some(c) = &crossing {
            let time = (self.steps as f64 - 1.0 + c.fraction) * self.cfg.dt;
            pass = Some(PassEvent { gate: target, offset: c.offset, time });
            self.progress.passed += 1;
            if c.offset <= self.cfg.admission_offset(self.track.gates[target].inner_side) {
                if let Some(slot) = self.track.target_gate(self.progress.passed) {
                    let entry = BufferEntry { state: self.state.clone(), passed: self.progress.passed };
                    self.buffer.insert(slot, entry);
                }
            }
        }
        self.progress.refresh(&self.track, &pos);
        let finished = !self.track.cyclic && self.track.target_gate(self.progress.passed).is_none();

        let axis = self.state.orientation * self.cfg.extrinsics.optical_axis();
        let inputs = RewardInputs {
            prev_distance,
            curr_distance,
            camera_angle: camera_angle(&axis, &self.progress.to_next),
            action,
            prev_action,
            pass_offset: pass.map(|p| p.offset),
            crash,
        };
        let mut breakdown = reward(&inputs, &self.cfg.reward);
        if finished {
            breakdown.pass += self.cfg.reward.terminal_reward_acyclic;
        }
        let total = breakdown.total();
        self.episode_reward += total;

        self.history.copy_within(4.., 0);
        self.history[HISTORY_DIM - 4..].copy_from_slice(&action);

        let done_reason = if ground {
            Some(DoneReason::CrashGround)
        } else if gate_hit {
            Some(DoneReason::CrashGate)
        } else if finished {
            Some(DoneReason::FinishedAcyclic)
        } else if self.steps >= self.cfg.max_steps {
            Some(DoneReason::Timeout)
        } else {
            None
        };
        self.done = done_reason.is_some();
        let episode = done_reason.map(|reason| EpisodeSummary {
            total_reward: self.episode_reward,
            length: self.steps,
            gates_passed: self.progress.passed,
            reason,
            success: self.is_success(reason),
        });
        Ok(StepResult {
            obs: self.observe(),
            reward: total,
            breakdown,
            done: self.done,
            done_reason,
            pass,
            episode,
            terminal_obs: None,
        })
    }

    fn is_success(&self, reason: DoneReason) -> bool {
        match reason {
            DoneReason::FinishedAcyclic => true,
            DoneReason::Timeout => {
                self.track.cyclic && self.progress.passed >= self.cfg.success_laps * self.track.n_gates() as u64
            }
            _ => false,
        }
    }
}

/// Body pose as an isometry (world from body).
pub fn body_pose(state: &QuadState) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::from(state.position), state.orientation)
}

fn perturb<R: rand::Rng + ?Sized>(
    base: &QuadState,
    spec: &RandomizationSpec,
    params: &QuadParams,
    rng: &mut R,
) -> QuadState {
    let mut s = base.clone();
    s.position += Vector3::new(symmetric(rng, spec.pos_xy), symmetric(rng, spec.pos_xy), symmetric(rng, spec.pos_z));
    let att = spec.att_deg.to_radians();
    let (roll, pitch, yaw) = (symmetric(rng, att), symmetric(rng, att), symmetric(rng, att));
    s.orientation = base.orientation * UnitQuaternion::from_euler_angles(roll, pitch, yaw);
    s.velocity += Vector3::new(symmetric(rng, spec.vel), symmetric(rng, spec.vel), symmetric(rng, spec.vel));
    let rate = spec.rate_dps.to_radians();
    s.body_rates += Vector3::new(symmetric(rng, rate), symmetric(rng, rate), symmetric(rng, rate));
    s.motor_speeds = nalgebra::Vector4::repeat(params.hover_motor_speed());
    s
}
