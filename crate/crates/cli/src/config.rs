//! Run configuration, read from TOML. Every field has a default, so an
//! empty file is valid; unknown keys are rejected.
//!
//! ```toml
//! variant = "cnn-ncp"
//! seed = 0
//! out_dir = "runs/cnn-ncp"
//!
//! [model]
//! dropout_rate = 0.5
//! unfolds = 6
//!
//! [train_data]
//! condition = "sunny"
//! frames = 2000
//! seed = 1
//! # dir = "recordings/lake"   # a drive-log directory instead of synthetic frames
//!
//! [[eval_data]]
//! condition = "cloudy"
//! frames = 500
//! seed = 2
//!
//! [training]
//! epochs = 10
//! lr = 1e-4
//!
//! [experiment]
//! variants = ["cnn", "cnn-ncp"]
//! seeds = [0, 1, 2]
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ncpdrive::data::{load_episode, synth_generate, Condition, Episode};
use ncpdrive::models::{ArchitectureSpec, Fusion, Variant};
use ncpdrive::training::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Model trained by `train`; default `cnn-ncp`.
    pub variant: Variant,
    /// Seeds parameter initialisation, wiring, shuffling, augmentation and
    /// dropout; default 0.
    pub seed: u64,
    /// Where checkpoints, reports and tables go; default `runs`.
    pub out_dir: PathBuf,
    pub model: ModelOverrides,
    /// Default: 2000 synthetic sunny frames, seed 1.
    pub train_data: DataSource,
    /// Default: 500 synthetic cloudy frames (seed 2) and 500 night frames
    /// (seed 3).
    pub eval_data: Vec<DataSource>,
    /// Defaults as in [`TrainConfig`].
    pub training: TrainConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::CnnNcp,
            seed: 0,
            out_dir: PathBuf::from("runs"),
            model: ModelOverrides::default(),
            train_data: DataSource::synthetic(Condition::Sunny, 2000, 1),
            eval_data: vec![
                DataSource::synthetic(Condition::Cloudy, 500, 2),
                DataSource::synthetic(Condition::Night, 500, 3),
            ],
            training: TrainConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

/// Changes to a variant's default architecture; unset fields keep the
/// variant default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    pub dropout_rate: Option<f64>,
    pub unfolds: Option<usize>,
    pub fusion: Option<Fusion>,
}

/// Either a drive-log directory or a synthetic episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub condition: Condition,
    /// Synthetic frame count; ignored when `dir` is set.
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn default_frames() -> usize {
    500
}

impl DataSource {
    pub fn synthetic(condition: Condition, frames: usize, seed: u64) -> Self {
        Self {
            condition,
            frames,
            seed,
            dir: None,
        }
    }

    pub fn load(&self) -> anyhow::Result<Episode> {
        match &self.dir {
            Some(dir) => load_episode(dir, Some(self.condition))
                .with_context(|| format!("loading drive log in {}", dir.display())),
            None => Ok(synth_generate(self.condition, self.frames, self.seed)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Default: all six variants.
    pub variants: Vec<Variant>,
    /// Default: `[0, 1, 2]`.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            seeds: vec![0, 1, 2],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn spec(&self, variant: Variant, seed: u64) -> ArchitectureSpec {
        let mut spec = ArchitectureSpec::new(variant, seed);
        if let Some(d) = self.model.dropout_rate {
            spec.dropout_rate = d;
        }
        if let Some(u) = self.model.unfolds {
            spec.ltc.unfolds = u;
        }
        if let Some(f) = self.model.fusion {
            if variant.is_dual() {
                spec.fusion = f;
            }
        }
        spec
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.training.clone()
        }
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.training.validate()?;
        for v in self.experiment.variants.iter().copied().chain([self.variant]) {
            self.spec(v, self.seed).validate()?;
        }
        if self.experiment.seeds.is_empty() || self.experiment.variants.is_empty() {
            bail!("experiment needs at least one variant and one seed");
        }
        for d in std::iter::once(&self.train_data).chain(&self.eval_data) {
            match &d.dir {
                Some(dir) if !dir.is_dir() => bail!("data directory {} does not exist", dir.display()),
                None if d.frames == 0 => bail!("synthetic data needs at least one frame"),
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("variant = \"cnn\"\nlearning_rate = 1").is_err());
        assert!(RunConfig::from_toml("[training]\nepoch = 3").is_err());
        assert!(RunConfig::from_toml("[training]\nseed = 3").is_err());
        assert!(RunConfig::from_toml("[model]\nwidth = 3").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig {
            variant: Variant::CnnDncp2,
            ..RunConfig::default()
        };
        cfg.model.unfolds = Some(3);
        cfg.training.epochs = 2;
        cfg.train_data.dir = Some("logs".into());
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_reach_the_spec() {
        let cfg = RunConfig::from_toml("[model]\ndropout_rate = 0.25\nunfolds = 2\nfusion = \"mean\"").unwrap();
        let spec = cfg.spec(Variant::CnnDncp4, 5);
        assert_eq!(spec.dropout_rate, 0.25);
        assert_eq!(spec.ltc.unfolds, 2);
        assert_eq!(spec.fusion, Fusion::Mean);
        assert_eq!(spec.seed, 5);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.model.dropout_rate = Some(1.5);
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.train_data.dir = Some("/definitely/not/here".into());
        assert!(cfg.validate().is_err());
    }
}
