use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{LatentSource, ProbeConfig, ProbeError, ProbeKind, ProbeReport, Series, Trend};
use crate::cvae::eval::{rmse, target};
use crate::cvae::{Cvae, Modality, Prediction};
use crate::fingersim::Frame;
use crate::seed::{indexed_rng, Stream};

const CHUNK: usize = 256;
// Sub-stream indices of the Sample stream reserved for probes.
const LATENT_STREAM: u32 = 16;
const ACTION_STREAM: u32 = 17;

pub(crate) fn field(p: &Prediction, m: Modality) -> Option<&[f32]> {
    match m {
        Modality::Proprio => p.proprio.as_deref(),
        Modality::Force => p.force.as_deref(),
        Modality::Flow => p.flow.as_deref(),
        Modality::Vision => None,
    }
}

pub(crate) fn latent_rng(seed: u64) -> ChaCha8Rng {
    indexed_rng(seed, Stream::Sample, LATENT_STREAM)
}

fn normal(rng: &mut impl Rng, d: usize) -> Vec<f32> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Conditions and decodes latents, chunked to bound memory.
fn decode_latents(model: &Cvae, z: &[Vec<f32>], actions: &[[f32; 3]]) -> Result<Vec<Prediction>, ProbeError> {
    let mut out = Vec::with_capacity(z.len());
    for (zs, acts) in z.chunks(CHUNK).zip(actions.chunks(CHUNK)) {
        let zc = model.condition(zs, acts)?;
        out.extend(model.decode(&zc)?);
    }
    Ok(out)
}

fn check_trials(cfg: &ProbeConfig) -> Result<(), ProbeError> {
    if cfg.trials == 0 {
        return Err(ProbeError::Config("at least one trial is required".into()));
    }
    Ok(())
}

fn report(kind: ProbeKind, model: &Cvae, cfg: &ProbeConfig, trials: usize, series: Vec<Series>, trends: Vec<Trend>) -> ProbeReport {
    ProbeReport { kind, model: model.config.label(), config: cfg.clone(), trials, series, trends }
}

/// Decodes `cfg.trials` latents drawn from the encoded distribution of
/// `current` and scores each against the true transition to `next`.
pub fn resample_stability(model: &Cvae, current: &Frame, next: &Frame, cfg: &ProbeConfig) -> Result<ProbeReport, ProbeError> {
    check_trials(cfg)?;
    let lat = model.encode(&[current])?;
    let (mu, logvar) = (&lat.mu[0], &lat.logvar[0]);
    let sigma: Vec<f32> = logvar.iter().map(|lv| if cfg.clamp_variance { 0.0 } else { (0.5 * lv).exp() }).collect();
    let mut rng = latent_rng(cfg.seed);
    let z: Vec<Vec<f32>> = (0..cfg.trials)
        .map(|_| {
            let eps = normal(&mut rng, mu.len());
            mu.iter().zip(&sigma).zip(eps).map(|((m, s), e)| m + s * e).collect()
        })
        .collect();
    let preds = decode_latents(model, &z, &vec![current.a; cfg.trials])?;
    let series = model
        .config
        .outputs
        .iter()
        .map(|&m| {
            let truth = target(m, current, next);
            Series::new(format!("{m}_rmse"), preds.iter().map(|p| rmse(field(p, m).unwrap_or(&[]), &truth)).collect())
        })
        .collect();
    Ok(report(ProbeKind::Resample, model, cfg, cfg.trials, series, Vec::new()))
}

/// Null-action and random-action reports over the same frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub null: ProbeReport,
    pub random: ProbeReport,
    pub trends: Vec<Trend>,
}

fn mean_magnitude(flow: &[f32]) -> f64 {
    let n = (flow.len() / 2).max(1) as f64;
    flow.chunks_exact(2).map(|uv| (uv[0] as f64).hypot(uv[1] as f64)).sum::<f64>() / n
}

/// Predicts every `(current, next)` transition once with a null action and
/// once with an action drawn uniformly within `bounds`, using the same
/// latent for both. Proprioception and force are scored against the input
/// frame itself and every output against the true next state.
pub fn action_perturbation(
    model: &Cvae,
    transitions: &[(&Frame, &Frame)],
    bounds: [f64; 3],
    cfg: &ProbeConfig,
) -> Result<Perturbation, ProbeError> {
    if transitions.is_empty() {
        return Err(ProbeError::Config("no frames to perturb".into()));
    }
    let mut latent = latent_rng(cfg.seed);
    let mut action_rng = indexed_rng(cfg.seed, Stream::Sample, ACTION_STREAM);
    let current: Vec<&Frame> = transitions.iter().map(|t| t.0).collect();
    let mut z = Vec::with_capacity(current.len());
    for chunk in current.chunks(CHUNK) {
        let lat = model.encode(chunk)?;
        for (mu, lv) in lat.mu.iter().zip(&lat.logvar) {
            let eps = normal(&mut latent, mu.len());
            z.push(if cfg.sampled { mu.iter().zip(lv).zip(eps).map(|((m, l), e)| m + (0.5 * l).exp() * e).collect() } else { mu.clone() });
        }
    }
    let random_actions: Vec<[f32; 3]> = current
        .iter()
        .map(|_| std::array::from_fn(|i| if bounds[i] > 0.0 { action_rng.random_range(-bounds[i]..=bounds[i]) as f32 } else { 0.0 }))
        .collect();
    let null_preds = decode_latents(model, &z, &vec![[0.0; 3]; z.len()])?;
    let random_preds = decode_latents(model, &z, &random_actions)?;

    let score = |preds: &[Prediction], kind| {
        let mut series = Vec::new();
        for &m in &model.config.outputs {
            if matches!(m, Modality::Proprio | Modality::Force) {
                let values = preds.iter().zip(transitions).map(|(p, (cur, _))| rmse(field(p, m).unwrap_or(&[]), &target(m, cur, cur))).collect();
                series.push(Series::new(format!("{m}_rmse_vs_input"), values));
            }
        }
        for &m in &model.config.outputs {
            let values = preds.iter().zip(transitions).map(|(p, (cur, next))| rmse(field(p, m).unwrap_or(&[]), &target(m, cur, next))).collect();
            series.push(Series::new(format!("{m}_rmse_vs_truth"), values));
        }
        if model.config.has_output(Modality::Flow) {
            series.push(Series::new("flow_magnitude", preds.iter().map(|p| mean_magnitude(p.flow.as_deref().unwrap_or(&[]))).collect()));
        }
        report(kind, model, cfg, transitions.len(), series, Vec::new())
    };
    let null = score(&null_preds, ProbeKind::ActionNull);
    let random = score(&random_preds, ProbeKind::ActionRandom);
    let mut trends = Vec::new();
    for name in ["proprio_rmse_vs_input", "flow_magnitude"] {
        if let (Some(a), Some(b)) = (null.series(name), random.series(name)) {
            trends.push(Trend {
                name: format!("null {name} below random"),
                holds: a.mean < b.mean,
                detail: format!("null {:.6} vs random {:.6}", a.mean, b.mean),
            });
        }
    }
    Ok(Perturbation { null, random, trends })
}

/// Decodes latents that were not produced by the encoder (noisy copies of
/// `mu`, or prior draws) under a fixed action and reports their deviation
/// from the mean-mode prediction. The same noise draws are used for every
/// noise scale under one seed.
pub fn synthetic_latent(model: &Cvae, frame: &Frame, action: [f32; 3], cfg: &ProbeConfig) -> Result<(ProbeReport, Vec<Prediction>), ProbeError> {
    check_trials(cfg)?;
    if !(cfg.noise.is_finite() && cfg.noise >= 0.0) {
        return Err(ProbeError::Config(format!("noise scale {} must be finite and non-negative", cfg.noise)));
    }
    let mu = model.encode(&[frame])?.mu.remove(0);
    let baseline = decode_latents(model, std::slice::from_ref(&mu), &[action])?.remove(0);
    let mut rng = latent_rng(cfg.seed);
    let noise = cfg.noise as f32;
    let z: Vec<Vec<f32>> = (0..cfg.trials)
        .map(|_| {
            let eps = normal(&mut rng, mu.len());
            match cfg.source {
                LatentSource::Perturbed => mu.iter().zip(eps).map(|(m, e)| m + noise * e).collect(),
                LatentSource::Prior => eps,
            }
        })
        .collect();
    let preds = decode_latents(model, &z, &vec![action; cfg.trials])?;
    let mut series: Vec<Series> = model
        .config
        .outputs
        .iter()
        .map(|&m| {
            let base = field(&baseline, m).unwrap_or(&[]);
            Series::new(format!("{m}_deviation"), preds.iter().map(|p| rmse(field(p, m).unwrap_or(&[]), base)).collect())
        })
        .collect();
    if model.config.has_output(Modality::Force) {
        let mins = preds.iter().map(|p| p.force.as_deref().unwrap_or(&[]).iter().fold(f64::INFINITY, |a, &v| a.min(v as f64))).collect();
        series.push(Series::new("force_min", mins));
    }
    Ok((report(ProbeKind::SyntheticLatent, model, cfg, cfg.trials, series, Vec::new()), preds))
}

/// Cartesian grid of actions, `q1` slowest and `q3` fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub q1: Vec<f32>,
    pub q2: Vec<f32>,
    pub q3: Vec<f32>,
}

impl ActionGrid {
    /// `counts` evenly spaced values over `±scale·bounds` per joint; a count
    /// of one gives the null increment.
    pub fn spanning(bounds: [f64; 3], counts: [usize; 3], scale: f64) -> Self {
        let axis = |b: f64, n: usize| -> Vec<f32> {
            if n <= 1 {
                return vec![0.0];
            }
            (0..n).map(|i| (scale * b * (2.0 * i as f64 / (n - 1) as f64 - 1.0)) as f32).collect()
        };
        Self { q1: axis(bounds[0], counts[0]), q2: axis(bounds[1], counts[1]), q3: axis(bounds[2], counts[2]) }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.q1.len(), self.q2.len(), self.q3.len()]
    }

    pub fn actions(&self) -> Vec<[f32; 3]> {
        let mut out = Vec::with_capacity(self.q1.len() * self.q2.len() * self.q3.len());
        for &a in &self.q1 {
            for &b in &self.q2 {
                for &c in &self.q3 {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSweep {
    pub shape: [usize; 3],
    pub actions: Vec<[f32; 3]>,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
    /// Mean-mode prediction under the frame's own recorded action.
    #[serde(skip)]
    pub baseline: Prediction,
    pub report: ProbeReport,
}

/// Decodes the posterior mean of `frame` under every grid action.
pub fn action_sweep(model: &Cvae, frame: &Frame, grid: &ActionGrid, cfg: &ProbeConfig) -> Result<ActionSweep, ProbeError> {
    let actions = grid.actions();
    if actions.is_empty() {
        return Err(ProbeError::Config("empty action grid".into()));
    }
    let mu = model.encode(&[frame])?.mu.remove(0);
    let baseline = decode_latents(model, std::slice::from_ref(&mu), &[frame.a])?.remove(0);
    let predictions = decode_latents(model, &vec![mu; actions.len()], &actions)?;
    let mut series = Vec::new();
    let mut trends = Vec::new();
    if let Some(base) = baseline.proprio.as_deref() {
        series.push(Series::new("proprio_deviation", predictions.iter().map(|p| rmse(p.proprio.as_deref().unwrap_or(&[]), base)).collect()));
        // Arm yaw response at mirrored q1 increments (index 20 is q1).
        let [n1, n2, n3] = grid.shape();
        let dev = |i: usize, j: usize, k: usize| predictions[(i * n2 + j) * n3 + k].proprio.as_ref().map_or(0.0, |p| p[20] - base[20]);
        let mut residuals = Vec::new();
        for i in 0..n1 / 2 {
            for j in 0..n2 {
                for k in 0..n3 {
                    let (a, b) = (dev(i, j, k) as f64, dev(n1 - 1 - i, j, k) as f64);
                    residuals.push((a + b).abs() / (a.abs() + b.abs() + 1e-12));
                }
            }
        }
        if !residuals.is_empty() {
            let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
            trends.push(Trend {
                name: "q1 response mirror-symmetric".into(),
                holds: mean < 0.5,
                detail: format!("mean antisymmetry residual {mean:.4} over {} mirrored pairs", residuals.len()),
            });
        }
    }
    let report = report(ProbeKind::ActionSweep, model, cfg, actions.len(), series, trends);
    Ok(ActionSweep { shape: grid.shape(), actions, predictions, baseline, report })
}
