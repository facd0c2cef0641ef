use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use softsense::cvae::{ModelConfig, TrainConfig};
use softsense::fingersim::SceneConfig;
use softsense::genprobe::ProbeConfig;
use softsense::latentlens::LensConfig;

/// Dataset generation settings that are not part of the scene.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub frames: usize,
    /// Frames per episode; 100 frames is a 10 s episode at 10 Hz.
    pub episode_frames: usize,
    /// Keep the scene's boxes in every episode instead of redrawing them.
    pub fixed_boxes: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { frames: 2000, episode_frames: 100, fixed_boxes: false }
    }
}

/// Contents of a `--config` TOML file. Every key is optional and unknown
/// keys are rejected; command-line flags override whatever is set here.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Overrides the per-section seeds when set.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scene: SceneConfig,
    pub simulate: SimulateConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub lens: LensConfig,
    pub probe: ProbeConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Seed from the flag, else the file's top-level seed, else `section`.
    pub fn seed(&self, flag: Option<u64>, section: u64) -> u64 {
        flag.or(self.seed).unwrap_or(section)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(toml::from_str::<RunConfig>("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[train]\nepoch = 3").is_err());
    }

    #[test]
    fn seed_precedence() {
        let file: RunConfig = toml::from_str("seed = 7\n[train]\nepochs = 3").unwrap();
        assert_eq!(file.train.epochs, 3);
        assert_eq!(file.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(file.seed(Some(1), 0), 1);
        assert_eq!(file.seed(None, 0), 7);
        assert_eq!(RunConfig::default().seed(None, 5), 5);
    }
}
