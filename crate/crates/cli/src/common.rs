use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};
use softsense::cvae::{load_checkpoint, split_by_episode, Checkpoint, Modality};
use softsense::fingersim::{read_dataset, Dataset, Dims, Frame};

use crate::args::{Common, ModelData, SplitArg};
use crate::config::RunConfig;
use crate::error::UsageError;

/// Output directory from the flag or the config file, created if missing.
pub fn out_dir(common: &Common, cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let Some(dir) = common.out.clone().or_else(|| cfg.out.clone()) else {
        return Err(UsageError("no output directory: pass --out or set `out` in the config file".into()).into());
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Fails unless the dataset records have the shapes the model was built for.
pub fn check_compatible(ckpt: &Checkpoint, ds: &Dataset) -> anyhow::Result<()> {
    let c = &ckpt.model.config;
    let expected = Dims::default();
    let uses_image = c.has_input(Modality::Vision) || c.has_output(Modality::Flow);
    let dims = &ds.manifest.dims;
    let joints_ok = dims.q_f == expected.q_f && dims.q_r == expected.q_r && dims.f == expected.f && dims.a == expected.a;
    if !joints_ok || (uses_image && (dims.v != expected.v || dims.flow != expected.flow)) {
        bail!(
            "dataset records (image {:?}, flow {:?}, {} finger joints) do not match model {} (image {:?}, flow {:?}, {} finger joints)",
            dims.v,
            dims.flow,
            dims.q_f,
            c.label(),
            expected.v,
            expected.flow,
            expected.q_f
        );
    }
    Ok(())
}

pub fn load(io: &ModelData) -> anyhow::Result<(Checkpoint, Dataset)> {
    let ckpt = load_checkpoint(&io.checkpoint).with_context(|| format!("loading checkpoint {}", io.checkpoint.display()))?;
    let ds = read_dataset(&io.data).with_context(|| format!("loading dataset {}", io.data.display()))?;
    check_compatible(&ckpt, &ds)?;
    Ok((ckpt, ds))
}

/// Transition pairs of a split, rebuilt from the checkpoint's training
/// seed and validation fraction.
pub fn split_pairs(ckpt: &Checkpoint, ds: &Dataset, split: SplitArg) -> anyhow::Result<Vec<(usize, usize)>> {
    if split == SplitArg::All {
        return Ok(ds.transition_pairs());
    }
    let s = split_by_episode(ds, ckpt.train.val_fraction, ckpt.train.seed)?;
    Ok(if split == SplitArg::Train { s.train_pairs } else { s.val_pairs })
}

/// Every frame of the episodes in a split.
pub fn split_frames<'a>(ckpt: &Checkpoint, ds: &'a Dataset, split: SplitArg) -> anyhow::Result<Vec<&'a Frame>> {
    if split == SplitArg::All {
        return Ok(ds.frames.iter().collect());
    }
    let s = split_by_episode(ds, ckpt.train.val_fraction, ckpt.train.seed)?;
    let episodes = if split == SplitArg::Train { s.train_episodes } else { s.val_episodes };
    let owner = ds.episode_of_frames();
    Ok(ds.frames.iter().zip(owner).filter(|(_, e)| episodes.contains(e)).map(|(f, _)| f).collect())
}

/// `horizon` consecutive transitions starting at pair `index` of `pairs`.
pub fn chain(ds: &Dataset, pairs: &[(usize, usize)], index: usize, horizon: usize) -> anyhow::Result<Vec<(usize, usize)>> {
    let Some(&first) = pairs.get(index) else {
        return Err(UsageError(format!("transition {index} out of range: split has {} transitions", pairs.len())).into());
    };
    let all = ds.transition_pairs();
    let mut out = vec![first];
    while out.len() < horizon {
        let last = out[out.len() - 1].1;
        match all.iter().find(|p| p.0 == last) {
            Some(&p) => out.push(p),
            None => bail!("transition {index} is followed by only {} consecutive steps, {horizon} needed", out.len()),
        }
    }
    Ok(out)
}
