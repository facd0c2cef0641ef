//! Held-out prediction error per output modality, in physical units.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cvae, CvaeError, Modality, Sampling};
use crate::fingersim::{Dataset, Frame};

const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityRmse {
    pub modality: Modality,
    /// Mean and spread of the per-frame RMSE.
    pub rmse_mean: f64,
    pub rmse_std: f64,
    /// Pooled RMSE of predicting the split's per-feature target mean.
    pub baseline_rmse: f64,
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rows: Vec<ModalityRmse>,
}

impl RmseReport {
    pub const CSV_HEADER: &'static str = "modality,rmse_mean,rmse_std,baseline_rmse,frames";

    pub fn get(&self, m: Modality) -> Option<&ModalityRmse> {
        self.rows.iter().find(|r| r.modality == m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.modality, r.rmse_mean, r.rmse_std, r.baseline_rmse, r.frames));
        }
        out
    }
}

/// Target of `modality` for the transition `current → next`. Flow toward
/// the next frame is stored with the current one.
pub(crate) fn target(m: Modality, current: &Frame, next: &Frame) -> Vec<f32> {
    match m {
        Modality::Proprio => next.proprio().to_vec(),
        Modality::Force => next.f.to_vec(),
        Modality::Flow => current.flow.clone(),
        Modality::Vision => Vec::new(),
    }
}

pub(crate) fn rmse(a: &[f32], b: &[f32]) -> f64 {
    let sse: f64 = a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    (sse / a.len().max(1) as f64).sqrt()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean-mode predictions for every pair, scored against the true next state.
pub fn evaluate(model: &Cvae, ds: &Dataset, pairs: &[(usize, usize)]) -> Result<RmseReport, CvaeError> {
    if pairs.is_empty() {
        return Err(CvaeError::Data("evaluation split is empty".into()));
    }
    let outputs = model.config.outputs.clone();
    let mut per_frame: Vec<Vec<f64>> = vec![Vec::with_capacity(pairs.len()); outputs.len()];
    let mut targets: Vec<Vec<Vec<f32>>> = vec![Vec::with_capacity(pairs.len()); outputs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for chunk in pairs.chunks(CHUNK) {
        let current: Vec<&Frame> = chunk.iter().map(|&(t, _)| &ds.frames[t]).collect();
        let actions: Vec<[f32; 3]> = current.iter().map(|f| f.a).collect();
        let preds = model.predict(&current, &actions, Sampling::Mean, &mut rng)?;
        for (pred, &(t, u)) in preds.iter().zip(chunk) {
            for (k, &m) in outputs.iter().enumerate() {
                let truth = target(m, &ds.frames[t], &ds.frames[u]);
                let guess = match m {
                    Modality::Proprio => pred.proprio.as_deref(),
                    Modality::Force => pred.force.as_deref(),
                    Modality::Flow => pred.flow.as_deref(),
                    Modality::Vision => None,
                }
                .ok_or(CvaeError::MissingModality(m))?;
                if guess.len() != truth.len() {
                    return Err(CvaeError::Data(format!("{m} prediction has {} values, target {}", guess.len(), truth.len())));
                }
                per_frame[k].push(rmse(guess, &truth));
                targets[k].push(truth);
            }
        }
    }
    let rows = outputs
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let (rmse_mean, rmse_std) = mean_std(&per_frame[k]);
            ModalityRmse { modality: m, rmse_mean, rmse_std, baseline_rmse: baseline(&targets[k]), frames: pairs.len() }
        })
        .collect();
    Ok(RmseReport { rows })
}

/// Pooled RMSE of the best constant predictor (the per-feature mean).
pub fn baseline(targets: &[Vec<f32>]) -> f64 {
    let Some(width) = targets.first().map(Vec::len) else { return 0.0 };
    let n = targets.len() as f64;
    let mut mean = vec![0.0f64; width];
    for t in targets {
        for (m, v) in mean.iter_mut().zip(t) {
            *m += *v as f64 / n;
        }
    }
    let sse: f64 = targets.iter().flat_map(|t| t.iter().zip(&mean).map(|(v, m)| (*v as f64 - m).powi(2))).sum();
    (sse / (n * width as f64)).sqrt()
}

/// Mean wall-clock milliseconds of `calls` sampled single-frame predictions.
pub fn time_predictions(model: &Cvae, frame: &Frame, calls: usize) -> Result<f64, CvaeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let start = Instant::now();
    for _ in 0..calls {
        model.predict(&[frame], &[frame.a], Sampling::Sample, &mut rng)?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / calls.max(1) as f64)
}
