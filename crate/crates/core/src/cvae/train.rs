//! Mini-batch ELBO training on `(t, t+1)` transition pairs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::standard_normal;
use super::{Batch, Checkpoint, Cvae, CvaeError, LossBreakdown, ModelConfig, Normalizer, RngState, TrainConfig};
use crate::fingersim::dataset::episode_pairs;
use crate::fingersim::Dataset;
use crate::numerics::{Adam, NumericsError, Tensor};
use crate::seed::{indexed_rng, Stream};

/// Episode-level train/validation partition and the pairs it induces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train_episodes: Vec<usize>,
    pub val_episodes: Vec<usize>,
    pub train_pairs: Vec<(usize, usize)>,
    pub val_pairs: Vec<(usize, usize)>,
}

/// Holds out `round(val_fraction · episodes)` whole episodes, chosen by a
/// seeded shuffle. With two or more episodes and a positive fraction, at
/// least one episode lands on each side.
pub fn split_by_episode(ds: &Dataset, val_fraction: f64, seed: u64) -> Result<Split, CvaeError> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(CvaeError::Config(format!("validation fraction {val_fraction} outside [0, 1)")));
    }
    let n = ds.manifest.episodes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut indexed_rng(seed, Stream::Shuffle, 0));
    let mut n_val = (val_fraction * n as f64).round() as usize;
    if val_fraction > 0.0 && n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    }
    let mut val_episodes = order[..n_val].to_vec();
    let mut train_episodes = order[n_val..].to_vec();
    val_episodes.sort_unstable();
    train_episodes.sort_unstable();
    let pairs = |eps: &[usize]| eps.iter().flat_map(|&e| episode_pairs(&ds.manifest.episodes[e])).collect();
    Ok(Split { train_pairs: pairs(&train_episodes), val_pairs: pairs(&val_episodes), train_episodes, val_episodes })
}

/// One row of the loss log. Epoch 0 evaluates the untrained model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_elbo: f64,
    /// NaN when the split has no validation pairs.
    pub val_elbo: f64,
    pub recon_proprio: f64,
    pub recon_force: f64,
    pub recon_flow: f64,
    pub kl: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,train_elbo,val_elbo,recon_proprio,recon_force,recon_flow,kl";

    fn new(epoch: usize, train: &LossBreakdown, val_elbo: f64) -> Self {
        Self {
            epoch,
            train_elbo: train.total,
            val_elbo,
            recon_proprio: train.recon_proprio,
            recon_force: train.recon_force,
            recon_flow: train.recon_flow,
            kl: train.kl,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch, self.train_elbo, self.val_elbo, self.recon_proprio, self.recon_force, self.recon_flow, self.kl
        )
    }

    pub fn to_csv(log: &[EpochLog]) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for row in log {
            out.push_str(&row.csv_row());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub split: Split,
}

pub(crate) fn pair_batch(model: &Cvae, ds: &Dataset, pairs: &[(usize, usize)]) -> Result<Batch, CvaeError> {
    let current: Vec<_> = pairs.iter().map(|&(t, _)| &ds.frames[t]).collect();
    let next: Vec<_> = pairs.iter().map(|&(_, u)| &ds.frames[u]).collect();
    let actions: Vec<_> = current.iter().map(|f| f.a).collect();
    Batch::assemble(&model.config, &model.norm, &current, &actions, Some(&next))
}

/// Pair-weighted mean ELBO over `pairs` with noise from `rng`, no gradients.
pub fn mean_elbo(
    model: &Cvae,
    ds: &Dataset,
    pairs: &[(usize, usize)],
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<LossBreakdown, CvaeError> {
    let mut acc = LossBreakdown::default();
    if pairs.is_empty() {
        acc.total = f64::NAN;
        return Ok(acc);
    }
    let values = model.param_values::<f32>();
    for chunk in pairs.chunks(batch_size.max(1)) {
        let batch = pair_batch(model, ds, chunk)?;
        let eps = standard_normal(rng, chunk.len(), model.latent_dim());
        let (loss, _) = model.elbo(&values, &batch, Some(eps), false)?;
        acc.accumulate(&loss, chunk.len() as f64 / pairs.len() as f64);
    }
    Ok(acc)
}

fn snapshot(model: &Cvae, cfg: &TrainConfig, step: u64, epoch: usize, shuffle: &ChaCha8Rng, sample: &ChaCha8Rng) -> Checkpoint {
    Checkpoint {
        model: model.clone(),
        train: cfg.clone(),
        step,
        epoch,
        rng: RngState { seed: cfg.seed, shuffle_word_pos: shuffle.get_word_pos(), sample_word_pos: sample.get_word_pos() },
    }
}

pub fn train(ds: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome, CvaeError> {
    train_with_progress(ds, model_cfg, cfg, |_| {})
}

/// Trains a fresh model, calling `on_epoch` after every log row. Fully
/// determined by `cfg.seed`: initialization, shuffling and latent noise each
/// draw from their own stream.
pub fn train_with_progress(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, CvaeError> {
    if cfg.batch_size == 0 {
        return Err(CvaeError::Config("batch size must be positive".into()));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(CvaeError::Config(format!("learning rate {} is not a finite non-negative number", cfg.learning_rate)));
    }
    let split = split_by_episode(ds, cfg.val_fraction, cfg.seed)?;
    if split.train_pairs.is_empty() {
        return Err(CvaeError::Data("no transition pairs in the training episodes".into()));
    }
    let train_frames = split.train_episodes.iter().flat_map(|&e| {
        let info = &ds.manifest.episodes[e];
        &ds.frames[info.start..info.start + info.count]
    });
    let norm = Normalizer::fit(train_frames, ds.manifest.scene.action_bounds);
    let mut model = Cvae::new(model_cfg.clone(), norm, &mut indexed_rng(cfg.seed, Stream::Init, 0))?;

    let mut shuffle_rng = indexed_rng(cfg.seed, Stream::Shuffle, 1);
    let mut sample_rng = indexed_rng(cfg.seed, Stream::Sample, 0);
    let val_elbo = |model: &Cvae| -> Result<f64, CvaeError> {
        Ok(mean_elbo(model, ds, &split.val_pairs, cfg.batch_size, &mut indexed_rng(cfg.seed, Stream::Sample, 1))?.total)
    };
    let initial = mean_elbo(&model, ds, &split.train_pairs, cfg.batch_size, &mut indexed_rng(cfg.seed, Stream::Sample, 2))?;
    let mut log = vec![EpochLog::new(0, &initial, val_elbo(&model)?)];
    on_epoch(&log[0]);

    let mut adam = Adam::new(cfg.learning_rate);
    let mut pairs = split.train_pairs.clone();
    for epoch in 1..=cfg.epochs {
        pairs.shuffle(&mut shuffle_rng);
        let mut acc = LossBreakdown::default();
        let chunks = pairs.len().div_ceil(cfg.batch_size);
        // Parameters before the epoch's final step: nothing later in the
        // epoch would reject that step, so the health check below does.
        let mut before_last = None;
        let mut last_batch = None;
        for (k, chunk) in pairs.chunks(cfg.batch_size).enumerate() {
            let batch = pair_batch(&model, ds, chunk)?;
            let eps = standard_normal(&mut sample_rng, chunk.len(), model.latent_dim());
            let values = model.param_values::<f32>();
            let (loss, grads) = model.elbo(&values, &batch, Some(eps), true)?;
            let step = adam.steps_taken();
            if k + 1 == chunks {
                before_last = Some((model.params.clone(), step, shuffle_rng.clone(), sample_rng.clone()));
            }
            let result = if loss.total.is_finite() {
                adam.step(&mut model.params, &grads)
            } else {
                Err(NumericsError::NonFiniteGradient("loss".into()))
            };
            match result {
                Ok(()) => {}
                // a rejected step leaves the parameters untouched
                Err(NumericsError::NonFiniteGradient(_)) => {
                    let last_good = Box::new(snapshot(&model, cfg, step, epoch - 1, &shuffle_rng, &sample_rng));
                    return Err(CvaeError::NonFinite { epoch, step, last_good });
                }
                Err(e) => return Err(e.into()),
            }
            acc.accumulate(&loss, chunk.len() as f64 / pairs.len() as f64);
            if k + 1 == chunks {
                last_batch = Some(batch);
            }
        }
        let val = val_elbo(&model)?;
        let health = if split.val_pairs.is_empty() {
            let batch = last_batch.as_ref().expect("at least one batch");
            let eps = Tensor::zeros(&[batch.size, model.latent_dim()]);
            model.elbo(&model.param_values::<f32>(), batch, Some(eps), false)?.0.total
        } else {
            val
        };
        if !health.is_finite() {
            let (params, step, shuffle, sample) = before_last.expect("at least one step");
            let mut good = model.clone();
            good.params = params;
            let last_good = Box::new(snapshot(&good, cfg, step, epoch - 1, &shuffle, &sample));
            return Err(CvaeError::NonFinite { epoch, step, last_good });
        }
        let row = EpochLog::new(epoch, &acc, val);
        on_epoch(&row);
        log.push(row);
    }
    let checkpoint = snapshot(&model, cfg, adam.steps_taken(), cfg.epochs, &shuffle_rng, &sample_rng);
    Ok(TrainOutcome { checkpoint, log, split })
}
