//! Checkpoint directories: `model.json` describes the network and
//! `weights.bin` holds every parameter as little-endian f32, concatenated in
//! the order of `model.json`'s `layers`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cvae, CvaeError, ModelConfig, Normalizer, TrainConfig};
use crate::numerics::{Parameter, Tensor};

pub const MODEL_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
const FORMAT: &str = "softsense-cvae";
const VERSION: u32 = 1;

/// Positions of the shuffle and latent-noise generators when the
/// checkpoint was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub shuffle_word_pos: u128,
    pub sample_word_pos: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Cvae,
    pub train: TrainConfig,
    /// Optimizer steps taken.
    pub step: u64,
    pub epoch: usize,
    pub rng: RngState,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Layer {
    name: String,
    shape: Vec<usize>,
}

// u128 word positions are kept as decimal strings so generic JSON readers
// cannot round them.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RngFile {
    seed: u64,
    shuffle_word_pos: String,
    sample_word_pos: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    config: ModelConfig,
    norm: Normalizer,
    train: TrainConfig,
    step: u64,
    epoch: usize,
    rng: RngFile,
    layers: Vec<Layer>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CvaeError + '_ {
    move |source| CvaeError::Io { path: path.display().to_string(), source }
}

pub fn save_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<(), CvaeError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let model = &ckpt.model;
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        config: model.config.clone(),
        norm: model.norm.clone(),
        train: ckpt.train.clone(),
        step: ckpt.step,
        epoch: ckpt.epoch,
        rng: RngFile {
            seed: ckpt.rng.seed,
            shuffle_word_pos: ckpt.rng.shuffle_word_pos.to_string(),
            sample_word_pos: ckpt.rng.sample_word_pos.to_string(),
        },
        layers: model.params.iter().map(|p| Layer { name: p.name.clone(), shape: p.value.shape().to_vec() }).collect(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| CvaeError::Checkpoint(e.to_string()))?;
    let path = dir.join(MODEL_FILE);
    fs::write(&path, json + "\n").map_err(io(&path))?;

    let mut bytes = Vec::with_capacity(model.parameter_count() * 4);
    for p in &model.params {
        for v in p.value.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let path = dir.join(WEIGHTS_FILE);
    fs::write(&path, bytes).map_err(io(&path))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint, CvaeError> {
    let path = dir.join(MODEL_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| CvaeError::Checkpoint(format!("{}: {e}", path.display())))?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(CvaeError::Checkpoint(format!("unsupported format {} v{}", file.format, file.version)));
    }
    file.config.validate()?;
    let word_pos = |s: &str| s.parse::<u128>().map_err(|e| CvaeError::Checkpoint(format!("rng position `{s}`: {e}")));
    let rng = RngState {
        seed: file.rng.seed,
        shuffle_word_pos: word_pos(&file.rng.shuffle_word_pos)?,
        sample_word_pos: word_pos(&file.rng.sample_word_pos)?,
    };

    let path = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&path).map_err(io(&path))?;
    let expected: usize = file.layers.iter().map(|l| l.shape.iter().product::<usize>() * 4).sum();
    if bytes.len() != expected {
        return Err(CvaeError::Checkpoint(format!("{} holds {} bytes, layers need {expected}", path.display(), bytes.len())));
    }
    let mut floats = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let params = file
        .layers
        .into_iter()
        .map(|l| {
            let n = l.shape.iter().product();
            let data = floats.by_ref().take(n).collect();
            Ok(Parameter::new(l.name, Tensor::new(l.shape, data)?))
        })
        .collect::<Result<Vec<_>, CvaeError>>()?;
    let model = Cvae::from_parts(file.config, file.norm, params)?;
    Ok(Checkpoint { model, train: file.train, step: file.step, epoch: file.epoch, rng })
}
