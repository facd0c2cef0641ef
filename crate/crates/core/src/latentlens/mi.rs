//! Plug-in mutual information of two scalar variables from an equal-width
//! 2-D histogram, in bits.

use serde::{Deserialize, Serialize};

use super::LensError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub bits: f64,
    /// Set when either variable is constant (the estimate is then 0).
    pub degenerate: bool,
    pub bins: usize,
    pub samples: usize,
}

fn bin_index(values: &[f64], bins: usize) -> Option<Vec<usize>> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return None;
    }
    let width = (hi - lo) / bins as f64;
    Some(values.iter().map(|&v| (((v - lo) / width) as usize).min(bins - 1)).collect())
}

pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<MiEstimate, LensError> {
    let op = "mutual-information";
    if bins < 2 {
        return Err(LensError::InvalidInput { op, reason: format!("need at least 2 bins, got {bins}") });
    }
    if x.len() != y.len() {
        return Err(LensError::InvalidInput { op, reason: format!("{} vs {} samples", x.len(), y.len()) });
    }
    if x.len() < 10 * bins {
        return Err(LensError::TooFewPoints { op, need: 10 * bins, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(LensError::InvalidInput { op, reason: "non-finite sample".into() });
    }
    let n = x.len();
    let (Some(bx), Some(by)) = (bin_index(x, bins), bin_index(y, bins)) else {
        return Ok(MiEstimate { bits: 0.0, degenerate: true, bins, samples: n });
    };
    let mut joint = vec![0u64; bins * bins];
    let (mut cx, mut cy) = (vec![0u64; bins], vec![0u64; bins]);
    for (&i, &j) in bx.iter().zip(&by) {
        joint[i * bins + j] += 1;
        cx[i] += 1;
        cy[j] += 1;
    }
    let nf = n as f64;
    let mut terms: Vec<f64> = Vec::new();
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                // c·N and cx·cy are exact integer products, so swapping the
                // variables yields the same multiset of terms.
                let ratio = (c as f64 * nf) / (cx[i] as f64 * cy[j] as f64);
                terms.push(c as f64 / nf * ratio.log2());
            }
        }
    }
    terms.sort_by(f64::total_cmp);
    let bits = terms.iter().sum::<f64>().max(0.0);
    Ok(MiEstimate { bits, degenerate: false, bins, samples: n })
}
