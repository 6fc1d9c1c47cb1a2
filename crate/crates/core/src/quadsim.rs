//! Rigid-body quadrotor dynamics.
//!
//! The state is position, attitude quaternion (world <- body), inertial
//! velocity, body rates and the four motor speeds. Propellers follow the
//! quadratic thrust/torque model, the body sees linear plus quadratic drag,
//! and each motor tracks its speed setpoint through a first-order lag.
//!
//! Frames: world is z-up with gravity along -z; body is x-forward, y-left,
//! z-up. Motors sit on an X frame at 45 degrees to the body axes.

use nalgebra::{Cholesky, Matrix3, Quaternion, UnitQuaternion, Vector3, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of scalar components in a flattened [`QuadState`].
const STATE_LEN: usize = 17;

/// Simulation truth for one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadState {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub velocity: Vector3<f64>,
    pub body_rates: Vector3<f64>,
    pub motor_speeds: Vector4<f64>,
}

impl QuadState {
    /// At rest at `position`, level, motors stopped.
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            orientation: UnitQuaternion::identity(),
            velocity: Vector3::zeros(),
            body_rates: Vector3::zeros(),
            motor_speeds: Vector4::zeros(),
        }
    }

    /// At rest with every motor spinning at the hover speed for `params`.
    pub fn hovering(position: Vector3<f64>, params: &QuadParams) -> Self {
        let mut state = Self::at_rest(position);
        state.motor_speeds = Vector4::repeat(params.hover_motor_speed());
        state
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    fn to_array(&self) -> [f64; STATE_LEN] {
        let q = self.orientation.quaternion();
        let mut x = [0.0; STATE_LEN];
        x[0..3].copy_from_slice(self.position.as_slice());
        x[3..7].copy_from_slice(&[q.w, q.i, q.j, q.k]);
        x[7..10].copy_from_slice(self.velocity.as_slice());
        x[10..13].copy_from_slice(self.body_rates.as_slice());
        x[13..17].copy_from_slice(self.motor_speeds.as_slice());
        x
    }

    fn from_array(x: &[f64; STATE_LEN]) -> Self {
        let q = Quaternion::new(x[3], x[4], x[5], x[6]);
        Self {
            position: Vector3::new(x[0], x[1], x[2]),
            orientation: UnitQuaternion::new_normalize(q),
            velocity: Vector3::new(x[7], x[8], x[9]),
            body_rates: Vector3::new(x[10], x[11], x[12]),
            motor_speeds: Vector4::new(x[13], x[14], x[15], x[16]),
        }
    }
}

/// Time derivative of a [`QuadState`]. The quaternion rate is not unit.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadStateDerivative {
    pub position: Vector3<f64>,
    pub orientation: Quaternion<f64>,
    pub velocity: Vector3<f64>,
    pub body_rates: Vector3<f64>,
    pub motor_speeds: Vector4<f64>,
}

/// Physical parameters. Field names in config files match the symbols
/// used throughout the docs (`m`, `J`, `Omega_max`, ...), SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadParams {
    /// Mass, kg.
    pub m: f64,
    /// Inertia, kg m^2, row-major.
    #[serde(rename = "J")]
    pub inertia: [[f64; 3]; 3],
    /// Motor time constant, s.
    pub k_mot: f64,
    /// Thrust coefficient, N s^2.
    pub c_f: f64,
    /// Yaw-torque coefficient, N m s^2.
    pub c_tau: f64,
    /// Distance from the center of mass to each motor, m.
    pub arm_length: f64,
    pub k_v_lin: f64,
    pub k_v_quad: f64,
    #[serde(rename = "Omega_min")]
    pub motor_speed_min: f64,
    #[serde(rename = "Omega_max")]
    pub motor_speed_max: f64,
    /// Gravity vector, m/s^2.
    pub g: [f64; 3],
    /// Upper bound on the mass-normalized collective thrust command, m/s^2.
    pub c_max: f64,
    /// Bound on each commanded body rate, rad/s.
    #[serde(rename = "omega_max")]
    pub rate_max: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        // ~0.75 kg racer, thrust-to-weight around 3.5 at Omega_max.
        let c_f = 7.15e-7;
        Self {
            m: 0.75,
            inertia: [[2.5e-3, 0.0, 0.0], [0.0, 2.1e-3, 0.0], [0.0, 0.0, 4.3e-3]],
            k_mot: 0.03,
            c_f,
            c_tau: 0.03 * c_f,
            arm_length: 0.15,
            k_v_lin: 0.05,
            k_v_quad: 0.02,
            motor_speed_min: 0.0,
            motor_speed_max: 3000.0,
            g: [0.0, 0.0, -9.81],
            c_max: 30.0,
            rate_max: 10.0,
        }
    }
}

impl QuadParams {
    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.inertia[r][c])
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.g)
    }

    /// Motor speed at which the four rotors together carry the weight.
    pub fn hover_motor_speed(&self) -> f64 {
        (self.m * self.gravity().norm() / (4.0 * self.c_f)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidParam { name, reason: reason.into() }
        }
        let finite = [
            self.m,
            self.k_mot,
            self.c_f,
            self.c_tau,
            self.arm_length,
            self.k_v_lin,
            self.k_v_quad,
            self.motor_speed_min,
            self.motor_speed_max,
            self.c_max,
            self.rate_max,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(bad("QuadParams", "all values must be finite"));
        }
        if self.m <= 0.0 {
            return Err(bad("m", "must be positive"));
        }
        if self.k_mot <= 0.0 {
            return Err(bad("k_mot", "must be positive"));
        }
        if self.c_f <= 0.0 || self.c_tau <= 0.0 {
            return Err(bad("c_f", "thrust and torque coefficients must be positive"));
        }
        if self.arm_length <= 0.0 {
            return Err(bad("arm_length", "must be positive"));
        }
        if self.motor_speed_min < 0.0 || self.motor_speed_max <= self.motor_speed_min {
            return Err(bad("Omega_max", "need Omega_max > Omega_min >= 0"));
        }
        if self.c_max <= 0.0 || self.rate_max <= 0.0 {
            return Err(bad("c_max", "action limits must be positive"));
        }
        let j = self.inertia_matrix();
        if (j - j.transpose()).abs().max() > 1e-12 * j.abs().max() {
            return Err(bad("J", "must be symmetric"));
        }
        if Cholesky::new(j).is_none() {
            return Err(bad("J", "must be positive definite"));
        }
        Ok(())
    }

    /// Lateral offset of each motor from the body axes on the X frame.
    fn motor_offset(&self) -> f64 {
        self.arm_length * std::f64::consts::FRAC_1_SQRT_2
    }
}

// Motor layout: 0 front-left, 1 front-right, 2 rear-right, 3 rear-left.
// Rows of the allocation matrix are mutually orthogonal sign patterns.
const ROLL_SIGN: [f64; 4] = [1.0, -1.0, -1.0, 1.0];
const PITCH_SIGN: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
const YAW_SIGN: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

/// Maps per-motor thrusts to (collective thrust, roll, pitch, yaw torque).
pub fn allocation_matrix(params: &QuadParams) -> nalgebra::Matrix4<f64> {
    let d = params.motor_offset();
    let kappa = params.c_tau / params.c_f;
    nalgebra::Matrix4::from_fn(|r, c| match r {
        0 => 1.0,
        1 => d * ROLL_SIGN[c],
        2 => d * PITCH_SIGN[c],
        _ => kappa * YAW_SIGN[c],
    })
}

/// Mass-normalized collective thrust plus body-rate setpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    /// Collective thrust divided by mass, m/s^2.
    pub thrust: f64,
    /// Body-rate setpoint, rad/s.
    pub rates: Vector3<f64>,
}

impl Action {
    pub fn new(thrust: f64, rates: Vector3<f64>) -> Self {
        Self { thrust, rates }
    }

    /// Hover command for a level vehicle.
    pub fn hover(params: &QuadParams) -> Self {
        Self::new(params.gravity().norm(), Vector3::zeros())
    }

    /// Maps a policy output in `[-1, 1]^4` to physical units. Channel 0
    /// spans `[0, c_max]`, channels 1..3 scale by `omega_max`. Inputs are
    /// clamped first.
    pub fn from_normalized(a: [f64; 4], params: &QuadParams) -> Self {
        let a = a.map(|x| x.clamp(-1.0, 1.0));
        Self {
            thrust: 0.5 * (a[0] + 1.0) * params.c_max,
            rates: Vector3::new(a[1], a[2], a[3]) * params.rate_max,
        }
    }

    pub fn to_normalized(&self, params: &QuadParams) -> [f64; 4] {
        [
            2.0 * self.thrust / params.c_max - 1.0,
            self.rates.x / params.rate_max,
            self.rates.y / params.rate_max,
            self.rates.z / params.rate_max,
        ]
    }
}

/// Proportional gains of the body-rate loop, 1/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateGains {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Default for RateGains {
    fn default() -> Self {
        Self { roll: 20.0, pitch: 20.0, yaw: 8.0 }
    }
}

impl RateGains {
    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }
}

/// Full state derivative of the rigid body with motor lag.
pub fn derivative(state: &QuadState, params: &QuadParams, motor_setpoints: &Vector4<f64>) -> QuadStateDerivative {
    assert!(state.is_finite(), "non-finite state passed to derivative");
    let dx = derivative_array(&state.to_array(), params, motor_setpoints);
    QuadStateDerivative {
        position: Vector3::new(dx[0], dx[1], dx[2]),
        orientation: Quaternion::new(dx[3], dx[4], dx[5], dx[6]),
        velocity: Vector3::new(dx[7], dx[8], dx[9]),
        body_rates: Vector3::new(dx[10], dx[11], dx[12]),
        motor_speeds: Vector4::new(dx[13], dx[14], dx[15], dx[16]),
    }
}

fn derivative_array(x: &[f64; STATE_LEN], params: &QuadParams, setpoints: &Vector4<f64>) -> [f64; STATE_LEN] {
    let q = Quaternion::new(x[3], x[4], x[5], x[6]);
    // The integrator carries an unnormalized quaternion between stages.
    let rot = UnitQuaternion::new_normalize(q);
    let v_world = Vector3::new(x[7], x[8], x[9]);
    let omega = Vector3::new(x[10], x[11], x[12]);
    let motors = Vector4::new(x[13], x[14], x[15], x[16]);

    let thrusts = motors.map(|w| params.c_f * w * w);
    let d = params.motor_offset();
    let kappa = params.c_tau / params.c_f;
    let mut collective = 0.0;
    let mut torque = Vector3::zeros();
    for i in 0..4 {
        collective += thrusts[i];
        torque.x += d * ROLL_SIGN[i] * thrusts[i];
        torque.y += d * PITCH_SIGN[i] * thrusts[i];
        torque.z += kappa * YAW_SIGN[i] * thrusts[i];
    }

    let v_body = rot.inverse_transform_vector(&v_world);
    let f_prop = Vector3::new(0.0, 0.0, collective);
    let f_aero = -(params.k_v_lin * v_body + params.k_v_quad * v_body.norm() * v_body);
    let accel = rot.transform_vector(&(f_prop + f_aero)) / params.m + params.gravity();

    let j = params.inertia_matrix();
    let j_inv = j.try_inverse().expect("inertia must be invertible");
    let omega_dot = j_inv * (torque - omega.cross(&(j * omega)));

    let q_dot = q * Quaternion::new(0.0, 0.5 * omega.x, 0.5 * omega.y, 0.5 * omega.z);
    let motor_dot = (setpoints - motors) / params.k_mot;

    let mut dx = [0.0; STATE_LEN];
    dx[0..3].copy_from_slice(v_world.as_slice());
    dx[3..7].copy_from_slice(&[q_dot.w, q_dot.i, q_dot.j, q_dot.k]);
    dx[7..10].copy_from_slice(accel.as_slice());
    dx[10..13].copy_from_slice(omega_dot.as_slice());
    dx[13..17].copy_from_slice(motor_dot.as_slice());
    dx
}

/// Body-rate controller and mixer: turns a CTBR command into motor-speed
/// setpoints. Proportional rate loop with gyroscopic feedforward, static
/// allocation, thrusts clamped to be non-negative and speeds to the motor
/// limits.
pub fn rate_controller(state: &QuadState, action: &Action, params: &QuadParams, gains: &RateGains) -> Vector4<f64> {
    let j = params.inertia_matrix();
    let omega = state.body_rates;
    let rate_error = action.rates - omega;
    let torque = j * gains.as_vector().component_mul(&rate_error) + omega.cross(&(j * omega));
    let collective = params.m * action.thrust;

    let d = params.motor_offset();
    let kappa = params.c_tau / params.c_f;
    Vector4::from_fn(|i, _| {
        let f = 0.25
            * (collective
                + torque.x / d * ROLL_SIGN[i]
                + torque.y / d * PITCH_SIGN[i]
                + torque.z / kappa * YAW_SIGN[i]);
        (f.max(0.0) / params.c_f)
            .sqrt()
            .clamp(params.motor_speed_min, params.motor_speed_max)
    })
}

/// One RK4 step of length `dt` with the motor setpoints held constant.
/// The quaternion is renormalized and motor speeds clamped afterwards.
pub fn integrate_rk4(state: &QuadState, params: &QuadParams, motor_setpoints: &Vector4<f64>, dt: f64) -> Result<QuadState> {
    let x0 = state.to_array();
    let f = |x: &[f64; STATE_LEN]| derivative_array(x, params, motor_setpoints);
    let offset = |x: &[f64; STATE_LEN], k: &[f64; STATE_LEN], h: f64| {
        let mut out = *x;
        out.iter_mut().zip(k).for_each(|(o, k)| *o += h * k);
        out
    };

    let k1 = f(&x0);
    let k2 = f(&offset(&x0, &k1, 0.5 * dt));
    let k3 = f(&offset(&x0, &k2, 0.5 * dt));
    let k4 = f(&offset(&x0, &k3, dt));
    let mut x1 = x0;
    for i in 0..STATE_LEN {
        x1[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if x1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let mut next = QuadState::from_array(&x1);
    next.motor_speeds = next
        .motor_speeds
        .map(|w| w.clamp(params.motor_speed_min, params.motor_speed_max));
    Ok(next)
}

/// Advances the vehicle by `dt`: runs the rate controller once, then
/// integrates with the resulting setpoints held.
pub fn step(state: &QuadState, action: &Action, params: &QuadParams, gains: &RateGains, dt: f64) -> Result<QuadState> {
    let setpoints = rate_controller(state, action, params, gains);
    integrate_rk4(state, params, &setpoints, dt)
}

/// Relative half-widths and absolute ranges for domain randomization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationSpec {
    pub thrust_frac: f64,
    pub drag_frac: f64,
    pub inertia_frac: f64,
    pub mass_frac: f64,
    /// Initial position half-width in the horizontal plane, m.
    pub pos_xy: f64,
    /// Initial position half-width along z, m.
    pub pos_z: f64,
    /// Initial attitude half-width per Euler angle, degrees.
    pub att_deg: f64,
    /// Initial velocity half-width per axis, m/s.
    pub vel: f64,
    /// Initial body-rate half-width per axis, deg/s.
    pub rate_dps: f64,
    /// Gate position half-width per axis, m.
    #[serde(alias = "gate_cm")]
    pub gate_offset: f64,
}

impl Default for RandomizationSpec {
    fn default() -> Self {
        Self {
            thrust_frac: 0.20,
            drag_frac: 0.20,
            inertia_frac: 0.20,
            mass_frac: 0.05,
            pos_xy: 0.8,
            pos_z: 0.6,
            att_deg: 20.0,
            vel: 0.8,
            rate_dps: 45.0,
            gate_offset: 0.05,
        }
    }
}

impl RandomizationSpec {
    /// No randomization at all.
    pub fn none() -> Self {
        Self {
            thrust_frac: 0.0,
            drag_frac: 0.0,
            inertia_frac: 0.0,
            mass_frac: 0.0,
            pos_xy: 0.0,
            pos_z: 0.0,
            att_deg: 0.0,
            vel: 0.0,
            rate_dps: 0.0,
            gate_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.thrust_frac,
            self.drag_frac,
            self.inertia_frac,
            self.mass_frac,
            self.pos_xy,
            self.pos_z,
            self.att_deg,
            self.vel,
            self.rate_dps,
            self.gate_offset,
        ];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParam {
                name: "RandomizationSpec",
                reason: "all half-widths must be finite and >= 0".into(),
            });
        }
        if self.thrust_frac >= 1.0 || self.drag_frac > 1.0 || self.inertia_frac >= 1.0 || self.mass_frac >= 1.0 {
            return Err(Error::InvalidParam {
                name: "RandomizationSpec",
                reason: "relative half-widths must keep parameters positive".into(),
            });
        }
        Ok(())
    }
}

/// Uniform draw in `[-half, half]`; always consumes one sample so the stream
/// position does not depend on the width.
pub(crate) fn symmetric<R: Rng + ?Sized>(rng: &mut R, half: f64) -> f64 {
    half * rng.random_range(-1.0..=1.0)
}

/// Copy of `params` with thrust, drag, inertia and mass scaled by
/// independent uniform factors.
pub fn randomize<R: Rng + ?Sized>(params: &QuadParams, spec: &RandomizationSpec, rng: &mut R) -> QuadParams {
    let thrust = 1.0 + symmetric(rng, spec.thrust_frac);
    let drag_lin = 1.0 + symmetric(rng, spec.drag_frac);
    let drag_quad = 1.0 + symmetric(rng, spec.drag_frac);
    let inertia = 1.0 + symmetric(rng, spec.inertia_frac);
    let mass = 1.0 + symmetric(rng, spec.mass_frac);

    let mut out = params.clone();
    out.c_f *= thrust;
    out.c_tau *= thrust;
    out.k_v_lin *= drag_lin;
    out.k_v_quad *= drag_quad;
    out.inertia = params.inertia.map(|row| row.map(|x| x * inertia));
    out.m *= mass;
    out
}
