//! Parameter inventory of the network for a given configuration.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{Modality, ModelConfig};
use crate::numerics::{Parameter, Tensor};

/// Hidden width of every MLP.
pub const LAYER_WIDTH: usize = 64;
/// Width of each proprio/force encoder output.
pub(crate) const ENCODER_OUT: usize = 32;
/// Width of the vision encoder output.
pub(crate) const VISION_OUT: usize = 64;
pub(crate) const PROPRIO: usize = 23;
pub(crate) const FORCE: usize = 20;
pub(crate) const ACTION: usize = 3;
/// Channels of the three stride-2 convolutions in the vision encoder; the
/// flow decoder mirrors them.
pub(crate) const CHANNELS: [usize; 3] = [8, 16, 32];
pub(crate) const KERNEL: usize = 4;
/// Spatial side of the deepest feature map (64 / 2³).
pub(crate) const BOTTLENECK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Init {
    /// Glorot uniform, for tanh and linear layers.
    Glorot { fan_in: usize, fan_out: usize },
    /// He uniform, for layers followed by relu.
    He { fan_in: usize },
    /// Glorot scaled down, so initial log-variances start near zero.
    Small { fan_in: usize, fan_out: usize },
    Zero,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip, default = "zero_init")]
    pub init: Init,
}

fn zero_init() -> Init {
    Init::Zero
}

struct Builder(Vec<ParamSpec>);

impl Builder {
    fn push(&mut self, name: String, shape: Vec<usize>, init: Init) {
        self.0.push(ParamSpec { name, shape, init });
    }

    fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize, relu: bool) {
        let init = if relu { Init::He { fan_in } } else { Init::Glorot { fan_in, fan_out } };
        self.push(format!("{name}.w"), vec![fan_in, fan_out], init);
        self.push(format!("{name}.b"), vec![fan_out], Init::Zero);
    }

    fn mlp(&mut self, name: &str, sizes: &[usize]) {
        for (i, w) in sizes.windows(2).enumerate() {
            self.dense(&format!("{name}.{i}"), w[0], w[1], false);
        }
    }
}

/// Ordered parameter list; the order is also the on-disk weight order.
pub(crate) fn layout(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let d = cfg.latent_dim;
    let h = LAYER_WIDTH;
    let mut b = Builder(Vec::new());
    let mut fused = 0;
    if cfg.has_input(Modality::Proprio) {
        b.mlp("enc_proprio", &[PROPRIO, h, ENCODER_OUT]);
        fused += ENCODER_OUT;
    }
    if cfg.has_input(Modality::Force) {
        b.mlp("enc_force", &[FORCE, h, ENCODER_OUT]);
        fused += ENCODER_OUT;
    }
    if cfg.has_input(Modality::Vision) {
        let mut c_in = 3;
        for (i, &c) in CHANNELS.iter().enumerate() {
            b.push(format!("enc_vision.conv{i}.w"), vec![c, c_in, KERNEL, KERNEL], Init::He { fan_in: c_in * KERNEL * KERNEL });
            b.push(format!("enc_vision.conv{i}.b"), vec![c], Init::Zero);
            c_in = c;
        }
        b.dense("enc_vision.fc", c_in * BOTTLENECK * BOTTLENECK, VISION_OUT, false);
        fused += VISION_OUT;
    }
    b.dense("fusion", fused, h, false);
    b.dense("mu", h, d, false);
    b.push("logvar.w".into(), vec![h, d], Init::Small { fan_in: h, fan_out: d });
    b.push("logvar.b".into(), vec![d], Init::Zero);
    b.mlp("cond", &[d + ACTION, d, d]);
    if cfg.has_output(Modality::Proprio) {
        b.mlp("dec_proprio", &[d, h, PROPRIO]);
    }
    if cfg.has_output(Modality::Force) {
        b.mlp("dec_force", &[d, h, FORCE]);
    }
    if cfg.has_output(Modality::Flow) {
        let deepest = CHANNELS[2];
        b.dense("dec_flow.fc", d, deepest * BOTTLENECK * BOTTLENECK, true);
        let outs = [CHANNELS[1], CHANNELS[0], 2];
        let mut c_in = deepest;
        for (i, &c) in outs.iter().enumerate() {
            // each output pixel of a stride-2, 4×4 transposed conv sees c_in·2·2 taps
            let init = if i < 2 { Init::He { fan_in: c_in * 4 } } else { Init::Glorot { fan_in: c_in * 4, fan_out: c * 4 } };
            b.push(format!("dec_flow.tconv{i}.w"), vec![c_in, c, KERNEL, KERNEL], init);
            b.push(format!("dec_flow.tconv{i}.b"), vec![c], Init::Zero);
            c_in = c;
        }
    }
    b.0
}

pub(crate) fn initialize(specs: &[ParamSpec], rng: &mut impl Rng) -> Vec<Parameter<f32>> {
    specs
        .iter()
        .map(|s| {
            let n: usize = s.shape.iter().product();
            let limit = match s.init {
                Init::Glorot { fan_in, fan_out } => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                Init::He { fan_in } => (6.0 / fan_in as f64).sqrt(),
                Init::Small { fan_in, fan_out } => 0.1 * (6.0 / (fan_in + fan_out) as f64).sqrt(),
                Init::Zero => 0.0,
            };
            let data = if limit > 0.0 {
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                (0..n).map(|_| dist.sample(rng) as f32).collect()
            } else {
                vec![0.0; n]
            };
            Parameter::new(s.name.clone(), Tensor::new(s.shape.clone(), data).expect("shape matches"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_tracks_modalities() {
        let full = layout(&ModelConfig::default());
        assert!(full.iter().any(|s| s.name == "enc_vision.fc.w" && s.shape == [2048, 64]));
        assert!(full.iter().any(|s| s.name == "dec_flow.tconv2.w" && s.shape == [8, 2, 4, 4]));
        assert!(full.iter().any(|s| s.name == "fusion.w" && s.shape == [96, 64]));
        let lean = layout(&ModelConfig::new(&[Modality::Proprio], &[Modality::Force], 16).unwrap());
        assert!(!lean.iter().any(|s| s.name.starts_with("enc_vision") || s.name.starts_with("dec_flow")));
        assert!(lean.iter().any(|s| s.name == "cond.0.w" && s.shape == [19, 16]));
        let mut names: Vec<_> = full.iter().map(|s| &s.name).collect();
        names.dedup();
        assert_eq!(names.len(), full.len());
    }
}
