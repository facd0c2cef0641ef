//! Probes of the generative behaviour of a trained model: repeated
//! sampling from one encoded distribution, null versus random actions,
//! noisy synthetic latents, action sweeps and open-loop rollouts that feed
//! predictions back as the next input.

mod probes;
mod rollout;
pub mod warp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cvae::CvaeError;

pub use probes::{action_perturbation, action_sweep, resample_stability, synthetic_latent, ActionGrid, ActionSweep, Perturbation};
pub use rollout::{rollout, rollout_drift, Rollout};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("probe configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] CvaeError),
    #[error("writing {path}: {reason}")]
    Output { path: String, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    Resample,
    ActionNull,
    ActionRandom,
    SyntheticLatent,
    ActionSweep,
    Rollout,
}

/// Where synthetic latents come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentSource {
    /// `mu` plus white noise of scale `noise`.
    #[default]
    Perturbed,
    /// Fresh draws from the standard-normal prior.
    Prior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Trials per probe (resample draws, synthetic draws).
    pub trials: usize,
    /// White-noise scale for synthetic latents.
    pub noise: f64,
    pub source: LatentSource,
    /// Rollout horizon.
    pub horizon: usize,
    /// Sample the latent instead of using the posterior mean.
    pub sampled: bool,
    /// Force the posterior variance to zero.
    pub clamp_variance: bool,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { trials: 100, noise: 1.0, source: LatentSource::Perturbed, horizon: 3, sampled: false, clamp_variance: false, seed: 0 }
    }
}

/// One measured quantity across the trials of a probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation; absent with fewer than two values.
    pub std: Option<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        // Shifted by the first value so constant series give exact moments.
        let shift = values.first().copied().unwrap_or(0.0);
        let offset = values.iter().map(|v| v - shift).sum::<f64>() / n;
        let mean = shift + offset;
        let std = (values.len() >= 2)
            .then(|| (values.iter().map(|v| (v - shift - offset).powi(2)).sum::<f64>() / n).sqrt());
        Self { name: name.into(), values, mean, std }
    }
}

/// A direction the reference work expects, checked on our own models and
/// reported rather than enforced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub kind: ProbeKind,
    pub model: String,
    pub config: ProbeConfig,
    pub trials: usize,
    pub series: Vec<Series>,
    pub trends: Vec<Trend>,
}

impl ProbeReport {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}
