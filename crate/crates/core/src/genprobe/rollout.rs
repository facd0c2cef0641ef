use super::probes::{field, latent_rng};
use super::warp::advect;
use super::{ProbeConfig, ProbeError, ProbeKind, ProbeReport, Series, Trend};
use crate::cvae::eval::rmse;
use crate::cvae::{Cvae, Modality, Prediction, Sampling};
use crate::fingersim::Frame;

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    /// One prediction per step.
    pub predictions: Vec<Prediction>,
    /// Input frame of each step; entry 0 is the observed frame, later ones
    /// are assembled from predictions.
    pub inputs: Vec<Frame>,
}

fn check_closure(model: &Cvae) -> Result<(), ProbeError> {
    for &m in &model.config.inputs {
        let needed = if m == Modality::Vision { Modality::Flow } else { m };
        if !model.config.has_output(needed) {
            return Err(ProbeError::Config(format!(
                "{} cannot roll out: input {m} needs output {needed} to be fed back",
                model.config.label()
            )));
        }
    }
    Ok(())
}

/// Next input frame: predicted joints and forces, and the current image
/// advected by the predicted flow.
fn feed_back(current: &Frame, pred: &Prediction, action: [f32; 3]) -> Frame {
    let mut next = current.clone();
    if let Some(p) = &pred.proprio {
        next.q_f.copy_from_slice(&p[..20]);
        next.q_r.copy_from_slice(&p[20..23]);
    }
    if let Some(f) = &pred.force {
        next.f.copy_from_slice(f);
    }
    if let Some(flow) = &pred.flow {
        if !current.v.is_empty() {
            let side = ((current.v.len() / 3) as f64).sqrt() as usize;
            next.v = advect(&current.v, flow, side, side, 3);
        }
        next.flow = flow.clone();
    }
    next.a = action;
    next
}

/// Open-loop prediction over `actions.len()` steps, feeding each prediction
/// back as the next input. Mean-mode latents unless `cfg.sampled`.
pub fn rollout(model: &Cvae, frame: &Frame, actions: &[[f32; 3]], cfg: &ProbeConfig) -> Result<Rollout, ProbeError> {
    check_closure(model)?;
    if actions.is_empty() {
        return Err(ProbeError::Config("rollout horizon must be at least 1".into()));
    }
    let sampling = if cfg.sampled { Sampling::Sample } else { Sampling::Mean };
    let mut rng = latent_rng(cfg.seed);
    let mut inputs = vec![frame.clone()];
    let mut predictions = Vec::with_capacity(actions.len());
    for (t, &a) in actions.iter().enumerate() {
        let pred = model.predict(&[&inputs[t]], &[a], sampling, &mut rng)?.remove(0);
        if t + 1 < actions.len() {
            inputs.push(feed_back(&inputs[t], &pred, actions[t + 1]));
        }
        predictions.push(pred);
    }
    Ok(Rollout { predictions, inputs })
}

/// Rolls out `cfg.horizon` steps and scores step `k` against `truths[k]`,
/// the true state after `k + 1` actions.
pub fn rollout_drift(model: &Cvae, frame: &Frame, actions: &[[f32; 3]], truths: &[&Frame], cfg: &ProbeConfig) -> Result<ProbeReport, ProbeError> {
    if actions.len() != cfg.horizon || truths.len() != cfg.horizon {
        return Err(ProbeError::Config(format!(
            "horizon {} needs as many actions and true states (got {} and {})",
            cfg.horizon,
            actions.len(),
            truths.len()
        )));
    }
    let r = rollout(model, frame, actions, cfg)?;
    let mut series = Vec::new();
    for m in [Modality::Proprio, Modality::Force] {
        if model.config.has_output(m) {
            let values = r
                .predictions
                .iter()
                .zip(truths)
                .map(|(p, t)| {
                    let truth: Vec<f32> = if m == Modality::Proprio { t.proprio().to_vec() } else { t.f.to_vec() };
                    rmse(field(p, m).unwrap_or(&[]), &truth)
                })
                .collect();
            series.push(Series::new(format!("{m}_drift"), values));
        }
    }
    let trends = series
        .iter()
        .filter(|s| s.values.len() >= 2)
        .map(|s| {
            let (first, last) = (s.values[0], s.values[s.values.len() - 1]);
            Trend {
                name: format!("{} accumulates", s.name),
                holds: first < last,
                detail: format!("step 1 {first:.6} vs step {} {last:.6}", s.values.len()),
            }
        })
        .collect();
    Ok(ProbeReport { kind: ProbeKind::Rollout, model: model.config.label(), config: cfg.clone(), trials: cfg.horizon, series, trends })
}
