//! Exact t-SNE: per-point bandwidths calibrated to a target perplexity,
//! symmetrized input affinities, Student-t output affinities and
//! gradient descent on KL(P‖Q) with momentum, per-coordinate gains and
//! early exaggeration.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_rows, LensError};
use crate::seed::{indexed_rng, Stream};

const FLOOR: f64 = 1e-12;
const BISECTION_STEPS: usize = 50;
const PERPLEXITY_TOL: f64 = 1e-5;
const MIN_POINTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneConfig {
    /// Target perplexity; clipped to (N−1)/3 for small inputs.
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 1000.0,
            iterations: 1000,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    pub embedding: Vec<[f64; 2]>,
    /// KL(P‖Q) at the final iterate.
    pub kl: f64,
    /// KL(P‖Q) when early exaggeration ends (at the start when it never runs).
    pub initial_kl: f64,
    /// Perplexity actually used.
    pub perplexity: f64,
    pub clipped: bool,
    /// Perplexity reached by each point's calibrated bandwidth.
    pub achieved_perplexity: Vec<f64>,
}

fn squared_distances(data: &[Vec<f64>]) -> Vec<f64> {
    let n = data.len();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            *out = data[i].iter().zip(&data[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    });
    d
}

/// Fills `p` with `p_{j|i}` for bandwidth `beta = 1/(2σ²)` and returns the
/// row's perplexity. Distances are shifted by their minimum for stability.
fn row_affinities(dist: &[f64], i: usize, beta: f64, p: &mut [f64]) -> f64 {
    let dmin = dist.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (pj, dj)) in p.iter_mut().zip(dist).enumerate() {
        *pj = if j == i { 0.0 } else { (-beta * (dj - dmin)).exp() };
        sum += *pj;
    }
    let sum = sum.max(FLOOR);
    let mut weighted = 0.0;
    for (pj, dj) in p.iter_mut().zip(dist) {
        *pj /= sum;
        weighted += *pj * (dj - dmin);
    }
    (sum.ln() + beta * weighted).exp()
}

/// Row-stochastic conditional affinities `p_{j|i}` (row-major N×N) and the
/// perplexity each row achieved.
pub fn conditional_affinities(data: &[Vec<f64>], perplexity: f64) -> Result<(Vec<f64>, Vec<f64>), LensError> {
    let n = data.len();
    check_rows("tsne", data, MIN_POINTS, 1)?;
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(LensError::InvalidInput { op: "tsne", reason: format!("perplexity {perplexity} outside (1, {n})") });
    }
    let dist = squared_distances(data);
    let mut p = vec![0.0; n * n];
    let achieved: Vec<f64> = p
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let d = &dist[i * n..(i + 1) * n];
            let mean = d.iter().sum::<f64>() / (n - 1) as f64;
            let mut beta = if mean > FLOOR { 1.0 / mean } else { 1.0 };
            let (mut lo, mut hi) = (0.0, f64::INFINITY);
            let mut perp = row_affinities(d, i, beta, row);
            for _ in 0..BISECTION_STEPS {
                if (perp - perplexity).abs() < PERPLEXITY_TOL {
                    break;
                }
                // Perplexity falls as the bandwidth narrows (beta grows).
                if perp > perplexity {
                    lo = beta;
                    beta = if hi.is_finite() { 0.5 * (beta + hi) } else { 2.0 * beta };
                } else {
                    hi = beta;
                    beta = 0.5 * (lo + beta);
                }
                perp = row_affinities(d, i, beta, row);
            }
            perp
        })
        .collect();
    Ok((p, achieved))
}

/// `p_ij = (p_{j|i} + p_{i|j}) / 2N`, floored.
pub fn joint_affinities(conditional: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((conditional[i * n + j] + conditional[j * n + i]) / (2 * n) as f64).max(FLOOR);
            }
        }
    }
    p
}

fn kernel(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    1.0 / (1.0 + (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
}

/// Normalizer `Z = Σ_{i≠j} (1 + ‖y_i − y_j‖²)⁻¹`, summed row by row in a
/// fixed order so the result does not depend on the thread count.
fn partition(y: &[[f64; 2]]) -> f64 {
    let rows: Vec<f64> =
        (0..y.len()).into_par_iter().map(|i| (0..y.len()).filter(|&j| j != i).map(|j| kernel(&y[i], &y[j])).sum()).collect();
    rows.iter().sum::<f64>().max(FLOOR)
}

fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let z = partition(y);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let pij = p[i * n + j];
                    let q = (kernel(&y[i], &y[j]) / z).max(FLOOR);
                    pij * (pij / q).ln()
                })
                .sum()
        })
        .collect();
    rows.iter().sum()
}

pub fn tsne_embed(data: &[Vec<f64>], cfg: &TsneConfig) -> Result<TsneResult, LensError> {
    let n = data.len();
    check_rows("tsne", data, MIN_POINTS, 1)?;
    if !(cfg.perplexity > 1.0) || !(cfg.learning_rate > 0.0) || !(cfg.exaggeration >= 1.0) {
        return Err(LensError::InvalidInput {
            op: "tsne",
            reason: "perplexity must exceed 1, learning rate be positive, exaggeration at least 1".into(),
        });
    }
    let cap = (n - 1) as f64 / 3.0;
    let (perplexity, clipped) = if cfg.perplexity > cap { (cap, true) } else { (cfg.perplexity, false) };
    let (cond, achieved_perplexity) = conditional_affinities(data, perplexity)?;
    let p = joint_affinities(&cond, n);
    drop(cond);

    let mut rng = indexed_rng(cfg.seed, Stream::Tsne, 0);
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [1e-2 * rng.sample::<f64, _>(StandardNormal), 1e-2 * rng.sample::<f64, _>(StandardNormal)]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let exaggerated = cfg.exaggeration_iters.min(cfg.iterations);
    let mut initial_kl = if exaggerated == 0 || exaggerated == cfg.iterations { Some(kl_divergence(&p, &y)) } else { None };

    for it in 0..cfg.iterations {
        let ex = if it < cfg.exaggeration_iters { cfg.exaggeration } else { 1.0 };
        let momentum = if it < cfg.momentum_switch { cfg.momentum } else { cfg.final_momentum };
        let z = partition(&y);
        let grads: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in (0..n).filter(|&j| j != i) {
                    let num = kernel(&y[i], &y[j]);
                    let coeff = (ex * p[i * n + j] - num / z) * num;
                    g[0] += coeff * (y[i][0] - y[j][0]);
                    g[1] += coeff * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for i in 0..n {
            for c in 0..2 {
                let same_sign = (grads[i][c] > 0.0) == (update[i][c] > 0.0);
                gains[i][c] = if same_sign { (gains[i][c] * 0.8).max(0.01) } else { gains[i][c] + 0.2 };
                update[i][c] = momentum * update[i][c] - cfg.learning_rate * gains[i][c] * grads[i][c];
                y[i][c] += update[i][c];
            }
        }
        let mean = y.iter().fold([0.0; 2], |m, p| [m[0] + p[0] / n as f64, m[1] + p[1] / n as f64]);
        for p in &mut y {
            p[0] -= mean[0];
            p[1] -= mean[1];
        }
        if it + 1 == exaggerated && initial_kl.is_none() {
            initial_kl = Some(kl_divergence(&p, &y));
        }
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LensError::Degenerate("t-SNE iterate diverged".into()));
    }
    let kl = kl_divergence(&p, &y);
    Ok(TsneResult { embedding: y, kl, initial_kl: initial_kl.unwrap_or(kl), perplexity, clipped, achieved_perplexity })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub perplexity: f64,
    /// Perplexity after clipping to (N−1)/3.
    pub effective: f64,
    pub kl: f64,
}

/// Final KL for each perplexity in `grid` (shared seed) and the index of
/// the smallest.
pub fn perplexity_sweep(data: &[Vec<f64>], grid: &[f64], cfg: &TsneConfig) -> Result<(Vec<SweepRow>, usize), LensError> {
    if grid.is_empty() {
        return Err(LensError::InvalidInput { op: "perplexity-sweep", reason: "empty grid".into() });
    }
    if let Some(bad) = grid.iter().find(|&&p| p >= data.len() as f64) {
        return Err(LensError::InvalidInput { op: "perplexity-sweep", reason: format!("perplexity {bad} not below N = {}", data.len()) });
    }
    let rows = grid
        .iter()
        .map(|&perplexity| {
            let r = tsne_embed(data, &TsneConfig { perplexity, ..cfg.clone() })?;
            Ok(SweepRow { perplexity, effective: r.perplexity, kl: r.kl })
        })
        .collect::<Result<Vec<_>, LensError>>()?;
    let best = (0..rows.len()).min_by(|&a, &b| rows[a].kl.total_cmp(&rows[b].kl)).unwrap_or(0);
    Ok((rows, best))
}
