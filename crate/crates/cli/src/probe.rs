use std::path::Path;

use softsense::cvae::{Modality, Prediction};
use softsense::fingersim::{Dataset, Frame};
use softsense::genprobe::warp::save_flow_strip;
use softsense::genprobe::{
    action_perturbation, action_sweep, resample_stability, rollout, rollout_drift, synthetic_latent, ActionGrid,
    LatentSource, ProbeConfig, Trend,
};

use crate::args::{ActionsArg, ProbeArgs, ProbeKindArg, RolloutArgs, SourceArg};
use crate::common::{chain, load, out_dir, split_pairs, write, write_json};
use crate::config::RunConfig;
use crate::error::UsageError;

const PNG_FRAMES: usize = 8;
const DEFAULT_GRID: [usize; 3] = [11, 5, 5];

fn image_side(ds: &Dataset) -> (usize, usize) {
    (ds.manifest.dims.flow[1], ds.manifest.dims.flow[0])
}

fn flow_strip(path: &Path, ds: &Dataset, preds: &[Prediction]) -> anyhow::Result<()> {
    let flows: Vec<Vec<f32>> = preds.iter().take(PNG_FRAMES).filter_map(|p| p.flow.clone()).collect();
    if flows.is_empty() {
        eprintln!("model predicts no flow; no image written");
        return Ok(());
    }
    let (w, h) = image_side(ds);
    Ok(save_flow_strip(path, &flows, w, h)?)
}

fn print_trends(trends: &[Trend]) {
    for t in trends {
        println!("{:<40} {:<5} {}", t.name, if t.holds { "holds" } else { "fails" }, t.detail);
    }
}

/// Start frame, actions and the states they should reach.
type ActionChain<'a> = (&'a Frame, Vec<[f32; 3]>, Vec<&'a Frame>);

/// `horizon` recorded or null actions from transition `index` with the
/// states they should reach.
fn action_chain<'a>(
    ds: &'a Dataset,
    pairs: &[(usize, usize)],
    index: usize,
    horizon: usize,
    actions: ActionsArg,
) -> anyhow::Result<ActionChain<'a>> {
    let steps = chain(ds, pairs, index, horizon)?;
    let start = &ds.frames[steps[0].0];
    Ok(match actions {
        ActionsArg::Recorded => {
            (start, steps.iter().map(|&(t, _)| ds.frames[t].a).collect(), steps.iter().map(|&(_, u)| &ds.frames[u]).collect())
        }
        ActionsArg::Zero => (start, vec![[0.0; 3]; horizon], vec![start; horizon]),
    })
}

pub fn probe(args: &ProbeArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &cfg)?;
    let mut pcfg: ProbeConfig = cfg.probe.clone();
    pcfg.trials = args.trials.unwrap_or(pcfg.trials);
    pcfg.noise = args.noise.unwrap_or(pcfg.noise);
    if let Some(s) = args.source {
        pcfg.source = match s {
            SourceArg::Perturbed => LatentSource::Perturbed,
            SourceArg::Prior => LatentSource::Prior,
        };
    }
    pcfg.horizon = args.horizon.unwrap_or(pcfg.horizon);
    pcfg.sampled |= args.sampled;
    pcfg.clamp_variance |= args.clamp_variance;
    pcfg.seed = cfg.seed(args.common.seed, pcfg.seed);

    let (ckpt, ds) = load(&args.io)?;
    let model = &ckpt.model;
    let pairs = split_pairs(&ckpt, &ds, args.select.split)?;
    let index = args.select.frame;
    let &(t, u) = pairs
        .get(index)
        .ok_or_else(|| UsageError(format!("transition {index} out of range: split has {} transitions", pairs.len())))?;
    let (current, next) = (&ds.frames[t], &ds.frames[u]);
    let path = out.join("probe.json");
    match args.kind {
        ProbeKindArg::Resample => {
            let report = resample_stability(model, current, next, &pcfg)?;
            write_json(&path, &report)?;
            for s in &report.series {
                println!("{:<20} mean {:.6}  std {}", s.name, s.mean, s.std.map_or("n/a".into(), |v| format!("{v:.6}")));
            }
        }
        ProbeKindArg::Action => {
            let frames: Vec<(&Frame, &Frame)> =
                pairs[index..].iter().take(pcfg.trials).map(|&(t, u)| (&ds.frames[t], &ds.frames[u])).collect();
            let p = action_perturbation(model, &frames, ds.manifest.scene.action_bounds, &pcfg)?;
            write_json(&path, &p)?;
            print_trends(&p.trends);
        }
        ProbeKindArg::Synthetic => {
            let (report, preds) = synthetic_latent(model, current, current.a, &pcfg)?;
            write_json(&path, &report)?;
            for s in &report.series {
                println!("{:<20} mean {:.6}", s.name, s.mean);
            }
            if args.png {
                flow_strip(&out.join("synthetic_flow.png"), &ds, &preds)?;
            }
        }
        ProbeKindArg::Sweep => {
            let counts = match args.grid_counts.as_deref() {
                Some(&[a, b, c]) => [a, b, c],
                _ => DEFAULT_GRID,
            };
            let grid = ActionGrid::spanning(ds.manifest.scene.action_bounds, counts, args.grid_scale.unwrap_or(1.0));
            let sweep = action_sweep(model, current, &grid, &pcfg)?;
            write_json(&path, &sweep)?;
            write(&out.join("sweep.csv"), sweep_csv(&sweep.actions, &sweep.predictions))?;
            print_trends(&sweep.report.trends);
        }
        ProbeKindArg::Rollout => {
            let (start, actions, truths) = action_chain(&ds, &pairs, index, pcfg.horizon, ActionsArg::Recorded)?;
            let report = rollout_drift(model, start, &actions, &truths, &pcfg)?;
            write_json(&path, &report)?;
            print_trends(&report.trends);
        }
    }
    Ok(())
}

fn sweep_csv(actions: &[[f32; 3]], preds: &[Prediction]) -> String {
    let mut out = String::from("q1,q2,q3,q1_arm,q2_arm,q3_arm,force_total\n");
    for (a, p) in actions.iter().zip(preds) {
        let arm = p.proprio.as_ref().map_or(["".to_string(), "".to_string(), "".to_string()], |q| {
            [q[20].to_string(), q[21].to_string(), q[22].to_string()]
        });
        let force = p.force.as_ref().map_or(String::new(), |f| f.iter().sum::<f32>().to_string());
        out.push_str(&format!("{},{},{},{},{},{},{force}\n", a[0], a[1], a[2], arm[0], arm[1], arm[2]));
    }
    out
}

fn rollout_csv(preds: &[Prediction], actions: &[[f32; 3]]) -> String {
    let mut header = vec!["step".to_string(), "a1".into(), "a2".into(), "a3".into()];
    let has = |m| preds.first().is_some_and(|p| match m {
        Modality::Proprio => p.proprio.is_some(),
        _ => p.force.is_some(),
    });
    if has(Modality::Proprio) {
        header.extend((0..20).map(|i| format!("q_f{i}")));
        header.extend((0..3).map(|i| format!("q_r{i}")));
    }
    if has(Modality::Force) {
        header.extend((0..20).map(|i| format!("f{i}")));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (k, (p, a)) in preds.iter().zip(actions).enumerate() {
        let mut row = vec![(k + 1).to_string(), a[0].to_string(), a[1].to_string(), a[2].to_string()];
        for v in p.proprio.iter().chain(&p.force).flatten() {
            row.push(v.to_string());
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn rollout_cmd(args: &RolloutArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &cfg)?;
    let mut pcfg = cfg.probe.clone();
    pcfg.horizon = args.horizon.unwrap_or(pcfg.horizon);
    pcfg.sampled |= args.sampled;
    pcfg.seed = cfg.seed(args.common.seed, pcfg.seed);
    let (ckpt, ds) = load(&args.io)?;
    let pairs = split_pairs(&ckpt, &ds, args.select.split)?;
    let (start, actions, truths) = action_chain(&ds, &pairs, args.select.frame, pcfg.horizon, args.actions)?;
    let r = rollout(&ckpt.model, start, &actions, &pcfg)?;
    let drift = rollout_drift(&ckpt.model, start, &actions, &truths, &pcfg)?;
    write(&out.join("rollout.csv"), rollout_csv(&r.predictions, &actions))?;
    write_json(&out.join("drift.json"), &drift)?;
    if args.png {
        flow_strip(&out.join("rollout_flow.png"), &ds, &r.predictions)?;
    }
    for s in &drift.series {
        let steps: Vec<String> = s.values.iter().map(|v| format!("{v:.6}")).collect();
        println!("{:<16} {}", s.name, steps.join("  "));
    }
    print_trends(&drift.trends);
    Ok(())
}
