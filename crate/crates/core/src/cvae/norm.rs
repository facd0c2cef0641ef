//! Input/target scaling fitted on the training split and stored with the
//! checkpoint. Proprioception is z-scored per feature; forces and flow are
//! only rescaled (so force stays non-negative and zero flow stays zero);
//! actions are divided by their actuation bounds.

use serde::{Deserialize, Serialize};

use super::layout::PROPRIO;
use crate::fingersim::Frame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub proprio_mean: Vec<f32>,
    pub proprio_std: Vec<f32>,
    pub force_scale: f32,
    pub flow_scale: f32,
    pub action_scale: [f32; 3],
}

const STD_FLOOR: f64 = 1e-3;
const SCALE_FLOOR: f64 = 1e-6;

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            proprio_mean: vec![0.0; PROPRIO],
            proprio_std: vec![1.0; PROPRIO],
            force_scale: 1.0,
            flow_scale: 1.0,
            action_scale: [1.0; 3],
        }
    }

    pub fn fit<'a>(frames: impl IntoIterator<Item = &'a Frame>, action_bounds: [f64; 3]) -> Self {
        let mut n = 0usize;
        let mut sum = [0.0f64; PROPRIO];
        let mut sq = [0.0f64; PROPRIO];
        let (mut force_sq, mut force_n) = (0.0f64, 0usize);
        let (mut flow_sq, mut flow_n) = (0.0f64, 0usize);
        for f in frames {
            n += 1;
            for (i, v) in f.proprio().iter().enumerate() {
                sum[i] += *v as f64;
                sq[i] += (*v as f64).powi(2);
            }
            force_sq += f.f.iter().map(|v| (*v as f64).powi(2)).sum::<f64>();
            force_n += f.f.len();
            flow_sq += f.flow.iter().map(|v| (*v as f64).powi(2)).sum::<f64>();
            flow_n += f.flow.len();
        }
        let n_f = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n_f).collect();
        let std = sq.iter().zip(&mean).map(|(s, m)| (s / n_f - m * m).max(0.0).sqrt().max(STD_FLOOR) as f32).collect();
        let rms = |s: f64, c: usize| (s / c.max(1) as f64).sqrt().max(SCALE_FLOOR) as f32;
        Self {
            proprio_mean: mean.iter().map(|&m| m as f32).collect(),
            proprio_std: std,
            force_scale: rms(force_sq, force_n),
            flow_scale: rms(flow_sq, flow_n),
            action_scale: action_bounds.map(|b| if b > 0.0 { b as f32 } else { 1.0 }),
        }
    }

    pub fn proprio_in(&self, p: &[f32]) -> Vec<f32> {
        p.iter().zip(self.proprio_mean.iter().zip(&self.proprio_std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn proprio_out(&self, p: &[f32]) -> Vec<f32> {
        p.iter().zip(self.proprio_mean.iter().zip(&self.proprio_std)).map(|(v, (m, s))| v * s + m).collect()
    }

    pub fn action_in(&self, a: &[f32; 3]) -> [f32; 3] {
        std::array::from_fn(|i| a[i] / self.action_scale[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(q: f32, f: f32, flow: f32) -> Frame {
        Frame { q_f: [q; 20], q_r: [q; 3], f: [f; 20], v: vec![0.0; 12], flow: vec![flow; 8], a: [0.0; 3] }
    }

    #[test]
    fn fit_and_invert() {
        let frames = [frame(1.0, 0.0, 1.0), frame(3.0, 2.0, -1.0)];
        let n = Normalizer::fit(&frames, [0.05, 0.0, 0.01]);
        assert_eq!(n.proprio_mean[0], 2.0);
        assert_eq!(n.proprio_std[0], 1.0);
        assert!((n.force_scale - 2.0f32.sqrt()).abs() < 1e-6);
        assert_eq!(n.flow_scale, 1.0);
        assert_eq!(n.action_scale, [0.05, 1.0, 0.01]);
        let p = frames[1].proprio();
        let z = n.proprio_in(&p);
        assert_eq!(z[0], 1.0);
        assert_eq!(n.proprio_out(&z), p.to_vec());
    }

    #[test]
    fn constant_features_get_a_floor() {
        let frames = [frame(0.5, 0.0, 0.0), frame(0.5, 0.0, 0.0)];
        let n = Normalizer::fit(&frames, [1.0; 3]);
        assert!(n.proprio_std.iter().all(|&s| s > 0.0));
        assert!(n.force_scale > 0.0 && n.flow_scale > 0.0);
    }
}
