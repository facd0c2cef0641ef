use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::batch::chw_to_hwc;
use super::layout::{initialize, layout, ParamSpec, ACTION, BOTTLENECK, CHANNELS};
use super::{Batch, CvaeError, Modality, ModelConfig, Normalizer};
use crate::fingersim::Frame;
use crate::numerics::{ConvGeom, Element, Graph, Parameter, Tensor, Var};

const DOWN: ConvGeom = ConvGeom { stride: 2, pad: 1 };

/// Graph handles of one forward evaluation.
#[derive(Clone, Debug)]
pub(crate) struct Forward {
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    pub zc: Var,
    pub proprio: Option<Var>,
    pub force: Option<Var>,
    pub flow: Option<Var>,
}

/// Parameter leaves of one graph, looked up by layer name.
pub(crate) struct Params {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl Params {
    pub fn register<T: Element>(g: &mut Graph<T>, specs: &[ParamSpec], values: &[Tensor<T>], track: bool) -> Self {
        let vars = values.iter().map(|v| if track { g.param(v.clone()) } else { g.constant(v.clone()) }).collect();
        let index = specs.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
        Self { vars, index }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn get(&self, name: &str) -> Var {
        self.vars[self.index[name]]
    }

    fn dense<T: Element>(&self, g: &mut Graph<T>, x: Var, name: &str) -> Result<Var, CvaeError> {
        let h = g.matmul(x, self.get(&format!("{name}.w")))?;
        Ok(g.add(h, self.get(&format!("{name}.b")))?)
    }

    /// Two-layer MLP with a tanh hidden layer and a linear output.
    fn mlp<T: Element>(&self, g: &mut Graph<T>, x: Var, name: &str) -> Result<Var, CvaeError> {
        let h = self.dense(g, x, &format!("{name}.0"))?;
        let h = g.tanh(h);
        self.dense(g, h, &format!("{name}.1"))
    }
}

pub(crate) fn encode_graph<T: Element>(
    g: &mut Graph<T>,
    p: &Params,
    cfg: &ModelConfig,
    batch: &Batch<T>,
) -> Result<(Var, Var), CvaeError> {
    let need = |t: &Option<Tensor<T>>, m| t.clone().ok_or(CvaeError::MissingModality(m));
    let mut features = Vec::new();
    if cfg.has_input(Modality::Proprio) {
        let x = g.constant(need(&batch.proprio, Modality::Proprio)?);
        let h = p.mlp(g, x, "enc_proprio")?;
        features.push(g.tanh(h));
    }
    if cfg.has_input(Modality::Force) {
        let x = g.constant(need(&batch.force, Modality::Force)?);
        let h = p.mlp(g, x, "enc_force")?;
        features.push(g.tanh(h));
    }
    if cfg.has_input(Modality::Vision) {
        let mut h = g.constant(need(&batch.vision, Modality::Vision)?);
        for i in 0..CHANNELS.len() {
            h = g.conv2d(h, p.get(&format!("enc_vision.conv{i}.w")), p.get(&format!("enc_vision.conv{i}.b")), DOWN)?;
            h = g.relu(h);
        }
        let flat = g.shape(h)[1..].iter().product::<usize>();
        let h = g.reshape(h, &[batch.size, flat])?;
        let h = p.dense(g, h, "enc_vision.fc")?;
        features.push(g.tanh(h));
    }
    let fused = if features.len() == 1 { features[0] } else { g.concat(&features, 1)? };
    let h = p.dense(g, fused, "fusion")?;
    let h = g.tanh(h);
    let mu = p.dense(g, h, "mu")?;
    let logvar = p.dense(g, h, "logvar")?;
    Ok((mu, logvar))
}

/// `z = mu + exp(logvar / 2) ⊙ eps`.
pub(crate) fn reparameterize<T: Element>(g: &mut Graph<T>, mu: Var, logvar: Var, eps: Tensor<T>) -> Result<Var, CvaeError> {
    let half = g.scale(logvar, 0.5);
    let std = g.exp(half);
    let eps = g.constant(eps);
    let noise = g.mul(std, eps)?;
    Ok(g.add(mu, noise)?)
}

pub(crate) fn condition_graph<T: Element>(g: &mut Graph<T>, p: &Params, z: Var, action: Var) -> Result<Var, CvaeError> {
    let x = g.concat(&[z, action], 1)?;
    p.mlp(g, x, "cond")
}

pub(crate) struct Outputs {
    pub proprio: Option<Var>,
    pub force: Option<Var>,
    pub flow: Option<Var>,
}

pub(crate) fn decode_graph<T: Element>(g: &mut Graph<T>, p: &Params, cfg: &ModelConfig, zc: Var) -> Result<Outputs, CvaeError> {
    let b = g.shape(zc)[0];
    let proprio = cfg.has_output(Modality::Proprio).then(|| p.mlp(g, zc, "dec_proprio")).transpose()?;
    let force = if cfg.has_output(Modality::Force) {
        let h = p.mlp(g, zc, "dec_force")?;
        Some(g.softplus(h))
    } else {
        None
    };
    let flow = if cfg.has_output(Modality::Flow) {
        let h = p.dense(g, zc, "dec_flow.fc")?;
        let h = g.relu(h);
        let mut h = g.reshape(h, &[b, CHANNELS[2], BOTTLENECK, BOTTLENECK])?;
        for i in 0..3 {
            h = g.conv_transpose2d(h, p.get(&format!("dec_flow.tconv{i}.w")), p.get(&format!("dec_flow.tconv{i}.b")), DOWN)?;
            if i < 2 {
                h = g.relu(h);
            }
        }
        Some(h)
    } else {
        None
    };
    Ok(Outputs { proprio, force, flow })
}

/// Full encode → sample → condition → decode pass. `eps = None` uses the
/// posterior mean.
pub(crate) fn forward<T: Element>(
    g: &mut Graph<T>,
    p: &Params,
    cfg: &ModelConfig,
    batch: &Batch<T>,
    eps: Option<Tensor<T>>,
) -> Result<Forward, CvaeError> {
    let (mu, logvar) = encode_graph(g, p, cfg, batch)?;
    let z = match eps {
        Some(eps) => reparameterize(g, mu, logvar, eps)?,
        None => mu,
    };
    let action = g.constant(batch.action.clone());
    let zc = condition_graph(g, p, z, action)?;
    let out = decode_graph(g, p, cfg, zc)?;
    Ok(Forward { mu, logvar, z, zc, proprio: out.proprio, force: out.force, flow: out.flow })
}

pub(crate) fn standard_normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor<f32> {
    let data = (0..rows * cols).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches")
}

/// Whether the latent is drawn from the posterior or fixed at its mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Sampling {
    #[default]
    Sample,
    Mean,
}

/// Encoded-distribution parameters of a batch, one row per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBatch {
    pub mu: Vec<Vec<f32>>,
    pub logvar: Vec<Vec<f32>>,
}

/// Next-state prediction in physical units plus the latents behind it.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Prediction {
    /// Finger then arm joints (23).
    pub proprio: Option<Vec<f32>>,
    /// Per-link normal forces (20), non-negative.
    pub force: Option<Vec<f32>>,
    /// Row-major HWC `(du, dv)` in pixels.
    pub flow: Option<Vec<f32>>,
    pub mu: Vec<f32>,
    pub logvar: Vec<f32>,
    pub z: Vec<f32>,
    pub zc: Vec<f32>,
}

fn rows(t: &Tensor<f32>) -> Vec<Vec<f32>> {
    let cols = t.shape()[1..].iter().product::<usize>().max(1);
    t.data().chunks(cols).map(<[f32]>::to_vec).collect()
}

fn stack(rows: &[Vec<f32>]) -> Result<Tensor<f32>, CvaeError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CvaeError::Data("ragged latent batch".into()));
    }
    Ok(Tensor::new(vec![rows.len(), cols], rows.concat())?)
}

/// A trained (or freshly initialized) model with its normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Cvae {
    pub config: ModelConfig,
    pub norm: Normalizer,
    pub params: Vec<Parameter<f32>>,
    pub(crate) specs: Vec<ParamSpec>,
}

impl Cvae {
    pub fn new(config: ModelConfig, norm: Normalizer, rng: &mut impl Rng) -> Result<Self, CvaeError> {
        config.validate()?;
        let config = config.canonical();
        let specs = layout(&config);
        let params = initialize(&specs, rng);
        Ok(Self { config, norm, params, specs })
    }

    pub(crate) fn from_parts(config: ModelConfig, norm: Normalizer, params: Vec<Parameter<f32>>) -> Result<Self, CvaeError> {
        let specs = layout(&config);
        if specs.len() != params.len() || specs.iter().zip(&params).any(|(s, p)| s.name != p.name || s.shape != p.value.shape()) {
            return Err(CvaeError::Checkpoint(format!("parameters do not match the layout of {}", config.label())));
        }
        Ok(Self { config, norm, params, specs })
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    fn inference_graph(&self) -> (Graph<f32>, Params) {
        let mut g = Graph::new();
        let p = Params::register(&mut g, &self.specs, &self.param_values(), false);
        (g, p)
    }

    pub fn batch(&self, frames: &[&Frame], actions: &[[f32; 3]]) -> Result<Batch, CvaeError> {
        Batch::assemble(&self.config, &self.norm, frames, actions, None)
    }

    pub fn encode(&self, frames: &[&Frame]) -> Result<LatentBatch, CvaeError> {
        let batch = self.batch(frames, &vec![[0.0; 3]; frames.len()])?;
        let (mut g, p) = self.inference_graph();
        let (mu, logvar) = encode_graph(&mut g, &p, &self.config, &batch)?;
        Ok(LatentBatch { mu: rows(g.value(mu)), logvar: rows(g.value(logvar)) })
    }

    /// Conditioned latents for latents `z` under physical-unit actions.
    pub fn condition(&self, z: &[Vec<f32>], actions: &[[f32; 3]]) -> Result<Vec<Vec<f32>>, CvaeError> {
        if z.len() != actions.len() {
            return Err(CvaeError::Data("latents and actions differ in count".into()));
        }
        let (mut g, p) = self.inference_graph();
        let zv = g.constant(stack(z)?);
        let a = Tensor::new(vec![z.len(), ACTION], actions.iter().flat_map(|a| self.norm.action_in(a)).collect())?;
        let av = g.constant(a);
        let zc = condition_graph(&mut g, &p, zv, av)?;
        Ok(rows(g.value(zc)))
    }

    /// Decodes conditioned latents into physical-unit predictions (latent
    /// fields other than `zc` are left empty).
    pub fn decode(&self, zc: &[Vec<f32>]) -> Result<Vec<Prediction>, CvaeError> {
        let (mut g, p) = self.inference_graph();
        let zv = g.constant(stack(zc)?);
        let out = decode_graph(&mut g, &p, &self.config, zv)?;
        let mut preds: Vec<Prediction> = zc.iter().map(|z| Prediction { zc: z.clone(), ..Default::default() }).collect();
        if let Some(v) = out.proprio {
            for (pred, row) in preds.iter_mut().zip(rows(g.value(v))) {
                pred.proprio = Some(self.norm.proprio_out(&row));
            }
        }
        if let Some(v) = out.force {
            for (pred, row) in preds.iter_mut().zip(rows(g.value(v))) {
                pred.force = Some(row.iter().map(|x| x * self.norm.force_scale).collect());
            }
        }
        if let Some(v) = out.flow {
            for (pred, row) in preds.iter_mut().zip(rows(g.value(v))) {
                pred.flow = Some(chw_to_hwc(&row, 2, self.norm.flow_scale));
            }
        }
        Ok(preds)
    }

    /// Encode → (sample) → condition → decode for every frame/action pair.
    pub fn predict(
        &self,
        frames: &[&Frame],
        actions: &[[f32; 3]],
        sampling: Sampling,
        rng: &mut impl Rng,
    ) -> Result<Vec<Prediction>, CvaeError> {
        let batch = self.batch(frames, actions)?;
        let (mut g, p) = self.inference_graph();
        let eps = match sampling {
            Sampling::Sample => Some(standard_normal(rng, frames.len(), self.latent_dim())),
            Sampling::Mean => None,
        };
        let fwd = forward(&mut g, &p, &self.config, &batch, eps)?;
        let (mu, logvar, z) = (rows(g.value(fwd.mu)), rows(g.value(fwd.logvar)), rows(g.value(fwd.z)));
        let zc = rows(g.value(fwd.zc));
        let mut preds = self.decode(&zc)?;
        for (i, pred) in preds.iter_mut().enumerate() {
            pred.mu = mu[i].clone();
            pred.logvar = logvar[i].clone();
            pred.z = z[i].clone();
        }
        Ok(preds)
    }
}
