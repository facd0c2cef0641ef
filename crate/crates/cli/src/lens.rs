use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::Serialize;
use softsense::cvae::{load_checkpoint, MODEL_FILE};
use softsense::fingersim::read_dataset;
use softsense::latentlens::plot::save_scatter;
use softsense::latentlens::{
    format_table, information_gain, latents, perplexity_sweep, LensConfig, MiReport, Projection, SweepRow, REFERENCE_TABLE,
};

use crate::args::{EmbedArgs, LensArgs, MethodArg, MiArgs};
use crate::common::{check_compatible, load, out_dir, split_frames, write, write_json};
use crate::config::RunConfig;

const PLOT_SIZE: u32 = 512;

fn lens_config(args: &LensArgs, cfg: &RunConfig, seed: Option<u64>) -> LensConfig {
    let mut lens = cfg.lens.clone();
    if let Some(m) = args.method {
        lens.projection = match m {
            MethodArg::Pca => Projection::Pca,
            MethodArg::Tsne => Projection::Tsne,
        };
    }
    lens.tsne.perplexity = args.perplexity.unwrap_or(lens.tsne.perplexity);
    lens.tsne.iterations = args.iterations.unwrap_or(lens.tsne.iterations);
    lens.tsne.seed = cfg.seed(seed, lens.tsne.seed);
    lens.bins = args.bins.unwrap_or(lens.bins);
    lens
}

#[derive(Serialize)]
struct Sweep {
    rows: Vec<SweepRow>,
    best_perplexity: f64,
    /// Whether KL at the largest perplexity is at most KL at the smallest.
    kl_decreases: bool,
}

pub fn embed(args: &EmbedArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &cfg)?;
    let lens = lens_config(&args.lens, &cfg, args.common.seed);
    let (ckpt, ds) = load(&args.io)?;
    let frames = split_frames(&ckpt, &ds, args.lens.split)?;
    let ig = information_gain(&ckpt.model, &frames, &lens)?;
    write(&out.join("encoded.csv"), ig.encoded.to_csv())?;
    write(&out.join("conditioned.csv"), ig.conditioned.to_csv())?;
    write_json(&out.join("report.json"), &ig.report)?;
    if args.png {
        for (name, a) in [("encoded.png", &ig.encoded), ("conditioned.png", &ig.conditioned)] {
            let points: Vec<[f64; 2]> = a.points.iter().map(|p| p.y).collect();
            let forces: Vec<f64> = a.points.iter().map(|p| p.force).collect();
            save_scatter(&out.join(name), &points, &forces, PLOT_SIZE)?;
        }
    }
    if !args.sweep.is_empty() {
        let (encoded, _) = latents(&ckpt.model, &frames)?;
        let (rows, best) = perplexity_sweep(&encoded, &args.sweep, &lens.tsne)?;
        let by_perplexity = |pick: fn(&SweepRow, &SweepRow) -> bool| rows.iter().reduce(|a, b| if pick(a, b) { a } else { b });
        let kl_decreases = match (by_perplexity(|a, b| a.perplexity <= b.perplexity), by_perplexity(|a, b| a.perplexity >= b.perplexity)) {
            (Some(lo), Some(hi)) => hi.kl <= lo.kl,
            _ => true,
        };
        let sweep = Sweep { best_perplexity: rows[best].perplexity, rows, kl_decreases };
        if !sweep.kl_decreases {
            eprintln!("note: t-SNE divergence does not fall with perplexity on these latents");
        }
        write_json(&out.join("sweep.json"), &sweep)?;
    }
    println!(
        "{} frames; MI encoded {:.4} bits, conditioned {:.4} bits",
        ig.report.samples, ig.report.mi_encoded, ig.report.mi_conditioned
    );
    Ok(())
}

/// Sort key placing reference rows first in their published order.
fn row_rank(r: &MiReport) -> (usize, usize, String) {
    let rank = REFERENCE_TABLE.iter().position(|t| t.name == r.row).unwrap_or(REFERENCE_TABLE.len());
    (rank, r.latent_dim, r.model.clone())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub const MI_CSV_HEADER: &str = "row,model,latent_dim,mi_encoded,mi_conditioned,gain_percent,spearman_encoded,spearman_conditioned,bins,samples,perplexity,perplexity_clipped,degenerate,reference_mi_encoded,reference_gain_percent";

fn mi_csv(reports: &[MiReport]) -> String {
    let mut out = format!("{MI_CSV_HEADER}\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.row,
            r.model,
            r.latent_dim,
            r.mi_encoded,
            r.mi_conditioned,
            opt(r.gain_percent),
            r.spearman_encoded,
            r.spearman_conditioned,
            r.bins,
            r.samples,
            opt(r.perplexity),
            r.perplexity_clipped,
            r.degenerate,
            opt(r.reference_mi_encoded),
            opt(r.reference_gain_percent)
        ));
    }
    out
}

fn grid_checkpoints(args: &MiArgs) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs = args.checkpoint.clone();
    if let Some(grid) = &args.grid {
        let mut found: Vec<PathBuf> = fs::read_dir(grid)
            .with_context(|| format!("reading grid directory {}", grid.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(MODEL_FILE).is_file())
            .collect();
        found.sort();
        dirs.extend(found);
    }
    Ok(dirs)
}

pub fn mi(args: &MiArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &cfg)?;
    let lens = lens_config(&args.lens, &cfg, args.common.seed);
    let ds = read_dataset(&args.data).with_context(|| format!("loading dataset {}", args.data.display()))?;
    let dirs = grid_checkpoints(args)?;
    let mut reports = Vec::new();
    for dir in &dirs {
        let ckpt = match load_checkpoint(dir) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("skipping {}: {e}", dir.display());
                continue;
            }
        };
        check_compatible(&ckpt, &ds)?;
        let frames = split_frames(&ckpt, &ds, args.lens.split)?;
        eprintln!("{}: {} frames", ckpt.model.config.label(), frames.len());
        reports.push(information_gain(&ckpt.model, &frames, &lens)?.report);
    }
    if reports.is_empty() {
        bail!("no readable checkpoint among {} candidates", dirs.len());
    }
    reports.sort_by_key(row_rank);
    let table = format_table(&reports);
    write(&out.join("mi.csv"), mi_csv(&reports))?;
    write_json(&out.join("mi.json"), &reports)?;
    write(&out.join("table.txt"), &table)?;
    print!("{table}");
    Ok(())
}
