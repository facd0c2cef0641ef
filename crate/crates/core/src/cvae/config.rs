use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CvaeError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    /// Finger and arm joints (23 values).
    Proprio,
    /// RGB camera frame; input only.
    Vision,
    /// Per-link normal forces (20 values).
    Force,
    /// Optical flow to the next frame; output only.
    Flow,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Proprio => "proprio",
            Modality::Vision => "vision",
            Modality::Force => "force",
            Modality::Flow => "flow",
        })
    }
}

impl FromStr for Modality {
    type Err = CvaeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proprio" | "proprioception" => Ok(Modality::Proprio),
            "vision" => Ok(Modality::Vision),
            "force" => Ok(Modality::Force),
            "flow" => Ok(Modality::Flow),
            other => Err(CvaeError::Config(format!("unknown modality `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub inputs: Vec<Modality>,
    pub outputs: Vec<Modality>,
    pub latent_dim: usize,
    pub w_proprio: f64,
    pub w_force: f64,
    /// Per-element normalization of the 64×64×2 flow reconstruction.
    pub w_flow: f64,
    pub beta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            inputs: vec![Modality::Proprio, Modality::Vision],
            outputs: vec![Modality::Proprio, Modality::Force, Modality::Flow],
            latent_dim: 16,
            w_proprio: 1.0,
            w_force: 1.0,
            w_flow: 1.0 / (64.0 * 64.0 * 2.0),
            beta: 1e-3,
        }
    }
}

impl ModelConfig {
    pub fn new(inputs: &[Modality], outputs: &[Modality], latent_dim: usize) -> Result<Self, CvaeError> {
        let cfg = Self { inputs: inputs.to_vec(), outputs: outputs.to_vec(), latent_dim, ..Self::default() };
        cfg.validate()?;
        Ok(cfg.canonical())
    }

    /// Sorted, de-duplicated modality lists.
    pub fn canonical(mut self) -> Self {
        self.inputs.sort();
        self.inputs.dedup();
        self.outputs.sort();
        self.outputs.dedup();
        self
    }

    pub fn validate(&self) -> Result<(), CvaeError> {
        let bad = |m: String| Err(CvaeError::Config(m));
        if self.inputs.is_empty() || self.outputs.is_empty() {
            return bad("inputs and outputs must be non-empty".into());
        }
        if let Some(m) = self.inputs.iter().find(|m| **m == Modality::Flow) {
            return bad(format!("{m} cannot be an input"));
        }
        if let Some(m) = self.outputs.iter().find(|m| **m == Modality::Vision) {
            return bad(format!("{m} cannot be an output (predict flow instead)"));
        }
        if self.latent_dim == 0 {
            return bad("latent dimension must be positive".into());
        }
        if [self.w_proprio, self.w_force, self.w_flow, self.beta].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("loss weights must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn has_input(&self, m: Modality) -> bool {
        self.inputs.contains(&m)
    }

    pub fn has_output(&self, m: Modality) -> bool {
        self.outputs.contains(&m)
    }

    /// Short label such as `proprio+vision->proprio+force+flow/d16`.
    pub fn label(&self) -> String {
        let join = |ms: &[Modality]| ms.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("+");
        format!("{}->{}/d{}", join(&self.inputs), join(&self.outputs), self.latent_dim)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of episodes held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 128, learning_rate: 1e-3, val_fraction: 0.1, seed: 0 }
    }
}
