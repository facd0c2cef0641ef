use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use softsense::cvae::Modality;

#[derive(Debug, Parser)]
#[command(name = "softsense", version, about = "Simulate a soft finger, train multimodal CVAEs and probe their latent spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset directory of settled finger frames.
    Simulate(SimulateArgs),
    /// Train a CVAE on a dataset and write a checkpoint with its loss log.
    Train(TrainArgs),
    /// Per-modality RMSE of a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Embed latents in 2-D and write the centroid-distance analysis.
    Embed(EmbedArgs),
    /// Mutual-information table over one or more checkpoints.
    Mi(MiArgs),
    /// Run a generative probe on a trained model.
    Probe(ProbeArgs),
    /// Open-loop multi-step prediction from one frame.
    Rollout(RolloutArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with defaults for any flag; flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Global seed for all random streams [default: per-section seed, 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: `out` from the config file].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Checkpoint and dataset inputs of the analysis subcommands.
#[derive(Debug, Args)]
pub struct ModelData {
    /// Dataset directory written by `simulate`.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Checkpoint directory written by `train`.
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pca,
    Tsne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbeKindArg {
    /// Repeated posterior draws for one frame.
    Resample,
    /// Null action against random actions on held-out frames.
    Action,
    /// Decoding noisy or prior latents.
    Synthetic,
    /// Decoding one latent over a grid of actions.
    Sweep,
    /// Drift of an open-loop rollout against the recorded episode.
    Rollout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Perturbed,
    Prior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ActionsArg {
    /// The actions recorded in the episode.
    Recorded,
    /// Null actions, scored against the unchanged start frame.
    Zero,
}

/// Comma-separated modality names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Modalities(pub Vec<Modality>);

fn modalities(s: &str) -> Result<Modalities, String> {
    s.split(',').map(|m| m.trim().parse::<Modality>().map_err(|e| e.to_string())).collect::<Result<_, _>>().map(Modalities)
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Frames to generate [default: 2000].
    #[arg(long, value_parser = positive)]
    pub frames: Option<usize>,
    /// Frames per episode [default: 100, i.e. 10 s at 10 Hz].
    #[arg(long, value_parser = positive)]
    pub episode_frames: Option<usize>,
    /// Keep the configured boxes in every episode instead of redrawing 1-3 per episode.
    #[arg(long)]
    pub fixed_boxes: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory written by `simulate`.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Comma-separated input modalities: proprio, vision, force [default: proprio,vision].
    #[arg(long, value_parser = modalities)]
    pub inputs: Option<Modalities>,
    /// Comma-separated output modalities: proprio, force, flow [default: proprio,force,flow].
    #[arg(long, value_parser = modalities)]
    pub outputs: Option<Modalities>,
    /// Latent dimension, e.g. 16, 64 or 128 [default: 16].
    #[arg(long, value_parser = positive)]
    pub latent_dim: Option<usize>,
    /// Training epochs [default: 50].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size [default: 128].
    #[arg(long, value_parser = positive)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Fraction of episodes held out for validation [default: 0.1].
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// KL weight [default: 0.001].
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub io: ModelData,
    /// Transitions to score.
    #[arg(long, value_enum, default_value_t = SplitArg::Val)]
    pub split: SplitArg,
    /// Also time this many single-frame predictions (printed, not written) [default: 0].
    #[arg(long, default_value_t = 0)]
    pub timing_calls: usize,
}

/// Projection and t-SNE flags of `embed` and `mi`.
#[derive(Debug, Args)]
pub struct LensArgs {
    /// Projection to 2-D [default: tsne].
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// t-SNE perplexity, clipped to (N-1)/3 [default: 1000].
    #[arg(long)]
    pub perplexity: Option<f64>,
    /// t-SNE iterations [default: 1000].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Histogram bins per variable for MI [default: 16].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Frames to embed: those of the training episodes, the held-out episodes, or all.
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub io: ModelData,
    #[command(flatten)]
    pub lens: LensArgs,
    /// Also write force-colored scatter plots.
    #[arg(long)]
    pub png: bool,
    /// Comma-separated perplexities to sweep on the encoded latents [default: none].
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct MiArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory written by `simulate`.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Checkpoint directory; repeat for several models.
    #[arg(long, value_name = "DIR")]
    pub checkpoint: Vec<PathBuf>,
    /// Directory whose checkpoint subdirectories form the table grid.
    #[arg(long, value_name = "DIR")]
    pub grid: Option<PathBuf>,
    #[command(flatten)]
    pub lens: LensArgs,
}

/// Frame selection of `probe` and `rollout`.
#[derive(Debug, Args)]
pub struct FrameArgs {
    /// Episodes the probed transitions come from.
    #[arg(long, value_enum, default_value_t = SplitArg::Val)]
    pub split: SplitArg,
    /// Index of the probed transition within the split.
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub io: ModelData,
    #[command(flatten)]
    pub select: FrameArgs,
    /// Probe to run.
    #[arg(long, value_enum)]
    pub kind: ProbeKindArg,
    /// Draws per probe, or frames for `action` [default: 100].
    #[arg(long, value_parser = positive)]
    pub trials: Option<usize>,
    /// Latent noise scale for `synthetic` [default: 1.0].
    #[arg(long)]
    pub noise: Option<f64>,
    /// Latent source for `synthetic` [default: perturbed].
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
    /// Steps for `rollout` [default: 3].
    #[arg(long, value_parser = positive)]
    pub horizon: Option<usize>,
    /// Feed sampled rather than mean latents forward.
    #[arg(long)]
    pub sampled: bool,
    /// Zero the posterior variance in `resample`.
    #[arg(long)]
    pub clamp_variance: bool,
    /// Grid points per joint for `sweep` [default: 11,5,5].
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub grid_counts: Option<Vec<usize>>,
    /// Fraction of the action bounds the `sweep` grid spans [default: 1.0].
    #[arg(long)]
    pub grid_scale: Option<f64>,
    /// Also write flow images.
    #[arg(long)]
    pub png: bool,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub io: ModelData,
    #[command(flatten)]
    pub select: FrameArgs,
    /// Steps to predict [default: 3].
    #[arg(long, value_parser = positive)]
    pub horizon: Option<usize>,
    /// Action sequence to apply.
    #[arg(long, value_enum, default_value_t = ActionsArg::Recorded)]
    pub actions: ActionsArg,
    /// Feed sampled rather than mean latents forward.
    #[arg(long)]
    pub sampled: bool,
    /// Also write a strip of the predicted flows.
    #[arg(long)]
    pub png: bool,
}
