//! TOML run configuration. Every field is optional; command-line flags win
//! over the file, and the file wins over built-in defaults.
//!
//! ```toml
//! seed = 42
//! out = "runs/rnn"
//!
//! [paths]
//! landmarks = "data/landmarks.csv"
//! manifest = "data/labels.csv"
//! segments = "data/segments"
//!
//! [synth]
//! n_real = 60
//! alpha = 0.05
//!
//! [model]
//! kind = "rnn"
//! lstm_units = [64, 32]
//!
//! [training]
//! rounds = "5:16,10:32,15:64"
//! lr = 0.0005
//!
//! [raster]
//! resolution = 32
//! noise_sigma = 0.01
//! ```

use std::path::{Path, PathBuf};

use lfx_core::models::{ModelKind, ModelSpec};
use lfx_core::pipeline::{parse_rounds, Fractions, RunSpec};
use lfx_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paths: Paths,
    pub synth: SynthSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub raster: RasterSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub landmarks: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub segments: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_real: Option<usize>,
    pub n_fake: Option<usize>,
    pub frames: Option<usize>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub point_fraction: Option<f64>,
    pub motion_amplitude: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<ModelKind>,
    pub lstm_units: Option<Vec<usize>>,
    pub dense_units: Option<Vec<usize>>,
    pub dropout: Option<f64>,
    pub conv_channels: Option<Vec<usize>>,
    pub kernel: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub rounds: Option<String>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub fractions: Option<Fractions>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterSection {
    pub resolution: Option<usize>,
    pub noise_sigma: Option<f64>,
}

pub const DEFAULT_SEED: u64 = 42;

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("lfx-out"))
    }

    pub fn landmarks(&self) -> PathBuf {
        self.paths.landmarks.clone().unwrap_or_else(|| self.out().join(lfx_core::synth::LANDMARKS_FILE))
    }

    pub fn manifest(&self) -> PathBuf {
        self.paths.manifest.clone().unwrap_or_else(|| self.out().join(lfx_core::synth::MANIFEST_FILE))
    }

    pub fn segments(&self) -> PathBuf {
        self.paths.segments.clone().unwrap_or_else(|| self.out().join("segments"))
    }

    pub fn synth_config(&self) -> SynthConfig {
        let d = SynthConfig::default();
        let s = &self.synth;
        SynthConfig {
            n_real: s.n_real.unwrap_or(d.n_real),
            n_fake: s.n_fake.unwrap_or(d.n_fake),
            frames: s.frames.unwrap_or(d.frames),
            alpha: s.alpha.unwrap_or(d.alpha),
            rho: s.rho.unwrap_or(d.rho),
            point_fraction: s.point_fraction.unwrap_or(d.point_fraction),
            motion_amplitude: s.motion_amplitude.unwrap_or(d.motion_amplitude),
            seed: self.seed(),
            ..d
        }
    }

    /// Resolves the training setup. `frames` is the segment length found in
    /// the store.
    pub fn run_spec(&self, frames: usize) -> Result<RunSpec, CliError> {
        let kind = self.model.kind.unwrap_or(ModelKind::Rnn);
        let mut spec = RunSpec::new(kind, self.seed());
        let m = &self.model;
        let d = ModelSpec::default_for(kind);
        spec.model = ModelSpec {
            frames,
            lstm_units: m.lstm_units.clone().unwrap_or(d.lstm_units),
            dense_units: m.dense_units.clone().unwrap_or(d.dense_units),
            dropout: m.dropout.unwrap_or(d.dropout),
            conv_channels: m.conv_channels.clone().unwrap_or(d.conv_channels),
            kernel: m.kernel.unwrap_or(d.kernel),
            resolution: self.raster.resolution.unwrap_or(d.resolution),
            ..d
        };
        let t = &self.training;
        if let Some(r) = &t.rounds {
            spec.rounds = parse_rounds(r).map_err(CliError::Data)?;
        }
        if let Some(f) = t.fractions {
            spec.fractions = f;
        }
        spec.adam.lr = t.lr.unwrap_or(spec.adam.lr);
        spec.adam.beta1 = t.beta1.unwrap_or(spec.adam.beta1);
        spec.adam.beta2 = t.beta2.unwrap_or(spec.adam.beta2);
        spec.adam.epsilon = t.epsilon.unwrap_or(spec.adam.epsilon);
        spec.noise_sigma = self.raster.noise_sigma.unwrap_or(spec.noise_sigma);
        spec.model.validate().map_err(|e| CliError::Data(e.to_string()))?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c.seed(), 42);
        assert_eq!(c.synth_config(), SynthConfig::default());
        let spec = c.run_spec(720).unwrap();
        assert_eq!(spec, RunSpec::new(ModelKind::Rnn, 42));
    }

    #[test]
    fn sections_override_defaults() {
        let c: RunConfig = toml::from_str(
            r#"
            seed = 7
            [model]
            kind = "cnn"
            conv_channels = [4, 2]
            [training]
            rounds = "1:8"
            lr = 0.01
            [raster]
            resolution = 16
            "#,
        )
        .unwrap();
        let spec = c.run_spec(720).unwrap();
        assert_eq!(spec.model.kind, ModelKind::Cnn);
        assert_eq!(spec.model.conv_channels, vec![4, 2]);
        assert_eq!(spec.model.resolution, 16);
        assert_eq!(spec.rounds.len(), 1);
        assert_eq!(spec.adam.lr, 0.01);
        assert_eq!(spec.seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[model]\nwidth = 3").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig {
            seed: Some(3),
            ..RunConfig::default()
        };
        c.model.kind = Some(ModelKind::Ann);
        c.training.rounds = Some("2:4".into());
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
