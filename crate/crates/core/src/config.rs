//! Run configuration: one TOML document holding everything a command needs.
//!
//! A file may point at separate quadrotor-parameter and camera files; after
//! [`RunConfig::resolve`] their contents live inline, so the snapshot written
//! by [`RunConfig::to_toml_string`] replays the run on its own.
//!
//! ```
//! use pixelrace::config::RunConfig;
//!
//! let cfg = RunConfig::from_toml_str("seed = 3\n[env]\nmode = \"pixel-asym\"\n").unwrap();
//! assert_eq!(cfg.seed, 3);
//! let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
//! assert_eq!(again, cfg);
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::EvalConfig;
use crate::gatecam::{CameraExtrinsics, CameraIntrinsics};
use crate::ppo::PpoConfig;
use crate::quadsim::QuadParams;
use crate::raceenv::EnvConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed for training; also the default evaluation seed.
    pub seed: u64,
    pub track: PathBuf,
    pub out: PathBuf,
    /// Rayon threads; absent means one per logical core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// File with [`QuadParams`] fields; replaces `env.params` on resolve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_params: Option<PathBuf>,
    /// File with `[intrinsics]` and `[extrinsics]` tables.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera: Option<PathBuf>,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            track: PathBuf::from("tracks/mini.toml"),
            out: PathBuf::from("runs/default"),
            workers: None,
            quad_params: None,
            camera: None,
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraFile {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config { path: path.to_path_buf(), reason: e.to_string() })
}

fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config { path: path.to_path_buf(), reason: e.to_string() })?;
    parse(&text, path)
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        parse(text, Path::new("<string>"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read(path.as_ref())
    }

    /// Inlines the referenced parameter and camera files. Relative paths
    /// are taken from `base`.
    pub fn resolve(&mut self, base: &Path) -> Result<()> {
        if let Some(p) = self.quad_params.take() {
            self.env.params = read::<QuadParams>(&base.join(p))?;
        }
        if let Some(p) = self.camera.take() {
            let cam: CameraFile = read(&base.join(p))?;
            self.env.intrinsics = cam.intrinsics;
            self.env.extrinsics = cam.extrinsics;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.ppo.validate()?;
        self.eval.validate()?;
        if self.workers == Some(0) {
            return Err(Error::InvalidParam { name: "workers", reason: "must be at least 1".into() });
        }
        if self.seed > i64::MAX as u64 || self.eval.seed > i64::MAX as u64 {
            return Err(Error::InvalidParam { name: "seed", reason: "must fit in a signed 64-bit integer".into() });
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config { path: PathBuf::from("<snapshot>"), reason: e.to_string() })
    }

    pub fn write_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raceenv::ObservationMode;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("sed = 1").is_err());
        assert!(RunConfig::from_toml_str("[ppo]\nlearning_rate = 1.0").is_err());
        assert!(RunConfig::from_toml_str("[env.reward]\nlambda9 = 1.0").is_err());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::from_toml_str("[env]\nmode = \"state\"\n[ppo]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.env.mode, ObservationMode::State);
        assert_eq!(cfg.ppo.epochs, 3);
        assert_eq!(cfg.ppo.clip, PpoConfig::default().clip);
    }

    #[test]
    fn resolve_inlines_side_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("quad.toml"), "m = 1.25\n").unwrap();
        std::fs::write(dir.path().join("cam.toml"), "[intrinsics]\nfx = 300.0\n[extrinsics]\nuptilt_deg = 20.0\n")
            .unwrap();
        let mut cfg =
            RunConfig::from_toml_str("quad_params = \"quad.toml\"\ncamera = \"cam.toml\"\n").unwrap();
        cfg.resolve(dir.path()).unwrap();
        assert_eq!(cfg.env.params.m, 1.25);
        assert_eq!(cfg.env.intrinsics.fx, 300.0);
        assert_eq!(cfg.env.extrinsics.uptilt_deg, 20.0);
        assert!(cfg.quad_params.is_none() && cfg.camera.is_none());
        let replay = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(replay, cfg);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig { workers: Some(0), ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.workers = None;
        cfg.seed = u64::MAX;
        assert!(cfg.validate().is_err());
        cfg.seed = 1;
        cfg.ppo.clip = -1.0;
        assert!(cfg.validate().is_err());
    }
}
