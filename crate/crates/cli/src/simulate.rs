use serde::Serialize;
use softsense::fingersim::dataset::FRAMES_FILE;
use softsense::fingersim::{generate_episodes, write_dataset, Dataset};

use crate::args::SimulateArgs;
use crate::common::{out_dir, sha256_file};
use crate::config::RunConfig;

#[derive(Serialize)]
struct Summary {
    frames: usize,
    dropped: usize,
    episodes: usize,
    frames_sha256: String,
}

pub fn run(args: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &cfg)?;
    let frames = args.frames.unwrap_or(cfg.simulate.frames);
    let per_episode = args.episode_frames.unwrap_or(cfg.simulate.episode_frames);
    let fixed = args.fixed_boxes || cfg.simulate.fixed_boxes;
    let seed = cfg.seed(args.common.seed, 0);
    cfg.scene.validate()?;

    let episodes = generate_episodes(&cfg.scene, frames, per_episode, seed, !fixed)?;
    let ds = Dataset::from_episodes(&episodes, &cfg.scene, seed);
    write_dataset(&out, &ds)?;
    let summary = Summary {
        frames: ds.manifest.frame_count,
        dropped: ds.manifest.dropped_frames,
        episodes: ds.manifest.episodes.len(),
        frames_sha256: sha256_file(&out.join(FRAMES_FILE))?,
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}
