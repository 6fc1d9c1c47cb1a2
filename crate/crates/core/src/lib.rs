//! Quadrotor racing from gate-edge pixels.
//!
//! The crate simulates an agile quadrotor, renders the inner edges of racing
//! gates through a fisheye camera into small observation masks, and trains
//! neural policies with PPO whose critic may see the full simulator state.
//!
//! Modules, bottom-up:
//!
//! - [`quadsim`]: rigid-body dynamics, body-rate controller, randomization
//! - [`gatecam`]: double-sphere camera and the gate-edge mask renderer
//! - [`track`]: gates, pass and collision tests, gate-index encoding
//! - [`raceenv`]: observations, reward, resets and vectorized stepping
//! - [`neural`]: CNN encoder, actor and critic MLPs, Gaussian policy
//! - [`ppo`]: GAE, clipped-surrogate updates and the training loop
//! - [`evalkit`]: success rate, gate-passing error and lap times
//! - [`config`]: run configuration files

pub mod config;
pub mod error;
pub mod evalkit;
pub mod gatecam;
pub mod neural;
pub mod ppo;
pub mod quadsim;
pub mod raceenv;
pub mod track;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub struct Dynamics;
    #[doc = include_str!("../../../book/src/camera.md")]
    pub struct Camera;
    #[doc = include_str!("../../../book/src/tracks.md")]
    pub struct Tracks;
    #[doc = include_str!("../../../book/src/environment.md")]
    pub struct Environment;
    #[doc = include_str!("../../../book/src/networks.md")]
    pub struct Networks;
    #[doc = include_str!("../../../book/src/training.md")]
    pub struct Training;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
