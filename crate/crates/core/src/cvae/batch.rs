//! Conversion of frames into normalized, channel-first network tensors.

use super::layout::{FORCE, PROPRIO};
use super::{CvaeError, Modality, ModelConfig, Normalizer};
use crate::fingersim::Frame;
use crate::numerics::{Element, Tensor};

/// Network inputs and (optionally) next-step targets, already normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T: Element = f32> {
    pub size: usize,
    pub proprio: Option<Tensor<T>>,
    pub force: Option<Tensor<T>>,
    /// `[B, 3, H, W]`.
    pub vision: Option<Tensor<T>>,
    /// `[B, 3]`, divided by the actuation bounds.
    pub action: Tensor<T>,
    pub target_proprio: Option<Tensor<T>>,
    pub target_force: Option<Tensor<T>>,
    /// `[B, 2, H, W]`.
    pub target_flow: Option<Tensor<T>>,
}

fn hwc_to_chw(src: &[f32], channels: usize, scale: f32, dst: &mut Vec<f32>) {
    let pixels = src.len() / channels;
    for c in 0..channels {
        dst.extend((0..pixels).map(|p| src[p * channels + c] / scale));
    }
}

fn image_side(len: usize, channels: usize) -> Result<usize, CvaeError> {
    let side = ((len / channels) as f64).sqrt() as usize;
    if side * side * channels != len || !side.is_multiple_of(8) || side == 0 {
        return Err(CvaeError::Data(format!("image of {len} values is not a square {channels}-channel frame divisible by 8")));
    }
    Ok(side)
}

impl Batch<f32> {
    /// Builds a batch from current frames, their actions and, when training
    /// or evaluating, the following frames. The flow target of a transition
    /// is stored with the current frame.
    pub fn assemble(
        cfg: &ModelConfig,
        norm: &Normalizer,
        current: &[&Frame],
        actions: &[[f32; 3]],
        next: Option<&[&Frame]>,
    ) -> Result<Self, CvaeError> {
        let b = current.len();
        if actions.len() != b || next.is_some_and(|n| n.len() != b) {
            return Err(CvaeError::Data("batch parts differ in length".into()));
        }
        if b == 0 {
            return Err(CvaeError::Data("empty batch".into()));
        }
        let tensor = |shape: Vec<usize>, data: Vec<f32>| Tensor::new(shape, data).map_err(CvaeError::from);

        let proprio = cfg
            .has_input(Modality::Proprio)
            .then(|| tensor(vec![b, PROPRIO], current.iter().flat_map(|f| norm.proprio_in(&f.proprio())).collect()))
            .transpose()?;
        let force = cfg
            .has_input(Modality::Force)
            .then(|| tensor(vec![b, FORCE], current.iter().flat_map(|f| f.f.map(|v| v / norm.force_scale)).collect()))
            .transpose()?;
        let vision = if cfg.has_input(Modality::Vision) {
            if current.iter().any(|f| f.v.is_empty()) {
                return Err(CvaeError::MissingModality(Modality::Vision));
            }
            let side = image_side(current[0].v.len(), 3)?;
            let mut data = Vec::with_capacity(b * current[0].v.len());
            for f in current {
                if f.v.len() != current[0].v.len() {
                    return Err(CvaeError::MissingModality(Modality::Vision));
                }
                hwc_to_chw(&f.v, 3, 1.0, &mut data);
            }
            Some(tensor(vec![b, 3, side, side], data)?)
        } else {
            None
        };
        let action = tensor(vec![b, 3], actions.iter().flat_map(|a| norm.action_in(a)).collect())?;

        let (mut target_proprio, mut target_force, mut target_flow) = (None, None, None);
        if let Some(next) = next {
            if cfg.has_output(Modality::Proprio) {
                target_proprio = Some(tensor(vec![b, PROPRIO], next.iter().flat_map(|f| norm.proprio_in(&f.proprio())).collect())?);
            }
            if cfg.has_output(Modality::Force) {
                target_force = Some(tensor(vec![b, FORCE], next.iter().flat_map(|f| f.f.map(|v| v / norm.force_scale)).collect())?);
            }
            if cfg.has_output(Modality::Flow) {
                let side = image_side(current[0].flow.len(), 2)?;
                let mut data = Vec::with_capacity(b * current[0].flow.len());
                for f in current {
                    hwc_to_chw(&f.flow, 2, norm.flow_scale, &mut data);
                }
                target_flow = Some(tensor(vec![b, 2, side, side], data)?);
            }
        }
        Ok(Self { size: b, proprio, force, vision, action, target_proprio, target_force, target_flow })
    }

    pub fn cast<U: Element>(&self) -> Batch<U> {
        let c = |t: &Option<Tensor<f32>>| t.as_ref().map(Tensor::cast);
        Batch {
            size: self.size,
            proprio: c(&self.proprio),
            force: c(&self.force),
            vision: c(&self.vision),
            action: self.action.cast(),
            target_proprio: c(&self.target_proprio),
            target_force: c(&self.target_force),
            target_flow: c(&self.target_flow),
        }
    }
}

/// Inverse of the channel-first flow layout, back to HWC pixels.
pub(crate) fn chw_to_hwc(src: &[f32], channels: usize, scale: f32) -> Vec<f32> {
    let pixels = src.len() / channels;
    let mut out = vec![0.0; src.len()];
    for c in 0..channels {
        for p in 0..pixels {
            out[p * channels + c] = src[c * pixels + p] * scale;
        }
    }
    out
}
