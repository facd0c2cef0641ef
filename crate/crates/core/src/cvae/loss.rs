//! ELBO objective.
//!
//! `L = Σ_m w_m·recon_m + β·KL`, where `recon_m` is the batch mean of each
//! sample's summed squared error in normalized units and
//! `KL = −½ Σ_j (1 + logvar_j − mu_j² − exp(logvar_j))`, also averaged over
//! the batch.

use serde::{Deserialize, Serialize};

use super::model::{forward, Forward, Params};
use super::{Batch, Cvae, CvaeError, ModelConfig};
use crate::numerics::{Element, Graph, Tensor, Var};

/// KL(N(mu, exp(logvar)) ‖ N(0, I)) for one sample.
pub fn kl_closed_form(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu.iter().zip(logvar).map(|(m, lv)| 1.0 + lv - m * m - lv.exp()).sum::<f64>()
}

/// Per-sample loss terms (normalized units).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon_proprio: f64,
    pub recon_force: f64,
    pub recon_flow: f64,
    pub kl: f64,
}

impl LossBreakdown {
    pub(crate) fn accumulate(&mut self, other: &LossBreakdown, weight: f64) {
        self.total += weight * other.total;
        self.recon_proprio += weight * other.recon_proprio;
        self.recon_force += weight * other.recon_force;
        self.recon_flow += weight * other.recon_flow;
        self.kl += weight * other.kl;
    }
}

pub(crate) struct LossVars {
    pub total: Var,
    pub recon_proprio: Option<Var>,
    pub recon_force: Option<Var>,
    pub recon_flow: Option<Var>,
    pub kl: Var,
}

impl LossVars {
    pub fn read<T: Element>(&self, g: &Graph<T>) -> LossBreakdown {
        let val = |v: Option<Var>| v.map_or(0.0, |v| g.value(v).item().as_f64());
        LossBreakdown {
            total: val(Some(self.total)),
            recon_proprio: val(self.recon_proprio),
            recon_force: val(self.recon_force),
            recon_flow: val(self.recon_flow),
            kl: val(Some(self.kl)),
        }
    }
}

fn recon<T: Element>(
    g: &mut Graph<T>,
    pred: Option<Var>,
    target: &Option<crate::numerics::Tensor<T>>,
    per_sample: f64,
) -> Result<Option<Var>, CvaeError> {
    let (Some(pred), Some(target)) = (pred, target) else { return Ok(None) };
    let t = g.constant(target.clone());
    let sse = g.squared_error(pred, t)?;
    Ok(Some(g.scale(sse, per_sample)))
}

pub(crate) fn elbo_graph<T: Element>(
    g: &mut Graph<T>,
    fwd: &Forward,
    batch: &Batch<T>,
    cfg: &ModelConfig,
) -> Result<LossVars, CvaeError> {
    let inv_b = 1.0 / batch.size as f64;
    let recon_proprio = recon(g, fwd.proprio, &batch.target_proprio, inv_b)?;
    let recon_force = recon(g, fwd.force, &batch.target_force, inv_b)?;
    let recon_flow = recon(g, fwd.flow, &batch.target_flow, inv_b)?;

    let mu2 = g.mul(fwd.mu, fwd.mu)?;
    let var = g.exp(fwd.logvar);
    let t = g.add(mu2, var)?;
    let t = g.sub(t, fwd.logvar)?;
    let s = g.sum(t);
    let n = g.value(fwd.mu).numel() as f64;
    let kl = g.scale(s, 0.5 * inv_b);
    let kl = g.offset(kl, -0.5 * n * inv_b);

    let mut total = g.scale(kl, cfg.beta);
    for (term, w) in [(recon_proprio, cfg.w_proprio), (recon_force, cfg.w_force), (recon_flow, cfg.w_flow)] {
        if let Some(term) = term {
            let weighted = g.scale(term, w);
            total = g.add(total, weighted)?;
        }
    }
    Ok(LossVars { total, recon_proprio, recon_force, recon_flow, kl })
}

impl Cvae {
    /// Parameter values converted to `T`, in layout order.
    pub fn param_values<T: Element>(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.value.cast()).collect()
    }

    /// ELBO of `batch` under parameter values `params` (layout order) and,
    /// when `with_grads` is set, its gradient for every parameter. `eps`
    /// holds the reparameterization noise; `None` decodes the posterior mean.
    pub fn elbo<T: Element>(
        &self,
        params: &[Tensor<T>],
        batch: &Batch<T>,
        eps: Option<Tensor<T>>,
        with_grads: bool,
    ) -> Result<(LossBreakdown, Vec<Tensor<T>>), CvaeError> {
        let mut g = Graph::new();
        let p = Params::register(&mut g, &self.specs, params, with_grads);
        let fwd = forward(&mut g, &p, &self.config, batch, eps)?;
        let loss = elbo_graph(&mut g, &fwd, batch, &self.config)?;
        let breakdown = loss.read(&g);
        if !with_grads {
            return Ok((breakdown, Vec::new()));
        }
        let mut grads = g.backward(loss.total)?;
        let grads = p
            .vars()
            .iter()
            .zip(params)
            .map(|(&v, value)| grads.take(v).unwrap_or_else(|| Tensor::zeros(value.shape())))
            .collect();
        Ok((breakdown, grads))
    }
}
