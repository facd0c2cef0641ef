use anyhow::Context;
use softsense::cvae::{evaluate, save_checkpoint, time_predictions, train_with_progress, CvaeError, EpochLog};
use softsense::fingersim::read_dataset;

use crate::args::{EvalArgs, TrainArgs};
use crate::common::{load, out_dir, split_pairs, write, write_json};
use crate::config::RunConfig;

pub const LOSS_FILE: &str = "loss.csv";
pub const LAST_GOOD_DIR: &str = "last_good";

pub fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &cfg)?;
    let mut model = cfg.model.clone();
    if let Some(v) = &args.inputs {
        model.inputs = v.0.clone();
    }
    if let Some(v) = &args.outputs {
        model.outputs = v.0.clone();
    }
    model.latent_dim = args.latent_dim.unwrap_or(model.latent_dim);
    model.beta = args.beta.unwrap_or(model.beta);
    let mut train = cfg.train.clone();
    train.epochs = args.epochs.unwrap_or(train.epochs);
    train.batch_size = args.batch_size.unwrap_or(train.batch_size);
    train.learning_rate = args.learning_rate.unwrap_or(train.learning_rate);
    train.val_fraction = args.val_fraction.unwrap_or(train.val_fraction);
    train.seed = cfg.seed(args.common.seed, train.seed);

    let ds = read_dataset(&args.data).with_context(|| format!("loading dataset {}", args.data.display()))?;
    let mut log = Vec::new();
    let outcome = train_with_progress(&ds, &model, &train, |row| {
        eprintln!("epoch {:>3}  train {:.5}  val {:.5}", row.epoch, row.train_elbo, row.val_elbo);
        log.push(*row);
    });
    write(&out.join(LOSS_FILE), EpochLog::to_csv(&log))?;
    match outcome {
        Ok(o) => save_checkpoint(&out, &o.checkpoint)?,
        Err(CvaeError::NonFinite { epoch, step, last_good }) => {
            let dir = out.join(LAST_GOOD_DIR);
            save_checkpoint(&dir, &last_good)?;
            eprintln!("last finite parameters saved to {}", dir.display());
            return Err(CvaeError::NonFinite { epoch, step, last_good }.into());
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

pub const RMSE_FILE: &str = "rmse.csv";

pub fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &cfg)?;
    let (ckpt, ds) = load(&args.io)?;
    let pairs = split_pairs(&ckpt, &ds, args.split)?;
    let report = evaluate(&ckpt.model, &ds, &pairs)?;
    write(&out.join(RMSE_FILE), report.to_csv())?;
    write_json(&out.join("rmse.json"), &report)?;
    print!("{}", report.to_csv());
    if args.timing_calls > 0 {
        let ms = time_predictions(&ckpt.model, &ds.frames[pairs[0].0], args.timing_calls)?;
        println!("mean prediction latency: {ms:.3} ms over {} calls", args.timing_calls);
    }
    Ok(())
}
