use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn softsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softsense")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = softsense(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = softsense(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small dataset and a one-epoch checkpoint shared by the analysis tests.
struct Fixture {
    _dir: TempDir,
    data: PathBuf,
    ckpt: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let ckpt = dir.path().join("ckpt");
        ok(&["simulate", "--frames", "160", "--episode-frames", "40", "--seed", "2", "--out", s(&data)]);
        ok(&["train", "--data", s(&data), "--epochs", "1", "--seed", "2", "--out", s(&ckpt)]);
        Fixture { _dir: dir, data, ckpt }
    })
}

fn manifest_frames(dir: &Path) -> usize {
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["frame_count"].as_u64().unwrap() as usize
}

#[test]
fn help_documents_every_subcommand() {
    for sub in ["simulate", "train", "eval", "embed", "mi", "probe", "rollout"] {
        let help = ok(&[sub, "--help"]);
        for flag in ["--config", "--seed", "--out"] {
            assert!(help.contains(flag), "{sub} help lacks {flag}");
        }
        assert!(help.contains("default"), "{sub} help states no defaults");
    }
}

#[test]
fn simulate_counts_and_digests() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = ok(&["simulate", "--frames", "100", "--seed", "4", "--out", s(&a)]);
    let second = ok(&["simulate", "--frames", "100", "--seed", "4", "--out", s(&b)]);
    assert_eq!(first, second);
    assert!(first.contains("frames_sha256"));
    assert_eq!(fs::read(a.join("frames.bin")).unwrap(), fs::read(b.join("frames.bin")).unwrap());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let dropped = m["dropped_frames"].as_u64().unwrap() as usize;
    assert_eq!(manifest_frames(&a) + dropped, 100);

    assert_eq!(code(&["simulate", "--frames", "0", "--out", s(&a)]).0, 2);
    assert_eq!(code(&["simulate", "--frames", "10"]).0, 2, "missing output directory");
}

#[test]
fn flags_override_config_file_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    fs::write(&cfg, format!("out = {:?}\nseed = 3\n[simulate]\nframes = 30\nepisode_frames = 10\n", s(&out))).unwrap();
    ok(&["simulate", "--config", s(&cfg)]);
    assert_eq!(manifest_frames(&out), 30);
    ok(&["simulate", "--config", s(&cfg), "--frames", "20"]);
    assert_eq!(manifest_frames(&out), 20);

    fs::write(&cfg, "[simulate]\nframes = 30\nbogus = 1\n").unwrap();
    let (c, err) = code(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(c, 2);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn train_accepts_reference_latent_sizes_and_rejects_bad_modalities() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    for d in ["16", "64", "128"] {
        let out = dir.path().join(d);
        ok(&["train", "--data", s(&f.data), "--epochs", "1", "--latent-dim", d, "--out", s(&out)]);
        let loss = fs::read_to_string(out.join("loss.csv")).unwrap();
        assert_eq!(loss.lines().count(), 3, "header, epoch 0 and epoch 1");
        assert!(out.join("model.json").is_file());
    }
    let out = dir.path().join("bad");
    assert_eq!(code(&["train", "--data", s(&f.data), "--inputs", "sonar", "--out", s(&out)]).0, 2);
    assert_eq!(code(&["train", "--data", s(&f.data), "--outputs", "vision", "--out", s(&out)]).0, 2);
    assert_eq!(code(&["train", "--data", s(&dir.path().join("none")), "--out", s(&out)]).0, 3);
}

#[test]
fn exploding_training_exits_numeric_and_keeps_last_good() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("boom");
    let (c, err) = code(&["train", "--data", s(&f.data), "--epochs", "1", "--learning-rate", "1e30", "--out", s(&out)]);
    assert_eq!(c, 4, "{err}");
    assert!(out.join("last_good").join("model.json").is_file());
}

#[test]
fn mismatched_image_size_is_a_data_error() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, "[scene.camera]\nwidth = 32\nheight = 32\n").unwrap();
    let small = dir.path().join("small");
    ok(&["simulate", "--config", s(&cfg), "--frames", "20", "--out", s(&small)]);
    let (c, err) = code(&["eval", "--data", s(&small), "--checkpoint", s(&f.ckpt), "--out", s(&dir.path().join("e"))]);
    assert_eq!(c, 3);
    assert!(err.contains("do not match model"), "{err}");
}

#[test]
fn embed_writes_one_row_per_frame_for_both_methods() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let n = manifest_frames(&f.data);
    for method in ["pca", "tsne"] {
        let out = dir.path().join(method);
        ok(&["embed", "--data", s(&f.data), "--checkpoint", s(&f.ckpt), "--method", method, "--iterations", "50", "--out", s(&out)]);
        for space in ["encoded.csv", "conditioned.csv"] {
            let text = fs::read_to_string(out.join(space)).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next().unwrap(), "point_id,y1,y2,force,distance");
            assert_eq!(lines.count(), n);
        }
    }
}

#[test]
fn mi_grid_lays_out_rows_dims_and_spaces() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid");
    for (name, inputs, outputs, d) in [
        ("p16", "proprio", "proprio,force", "16"),
        ("v16", "proprio,vision", "proprio,force", "16"),
        ("v64", "proprio,vision", "proprio,force", "64"),
    ] {
        let out = grid.join(name);
        ok(&["train", "--data", s(&f.data), "--epochs", "0", "--inputs", inputs, "--outputs", outputs, "--latent-dim", d, "--out", s(&out)]);
    }
    fs::create_dir_all(grid.join("empty")).unwrap();
    let out = dir.path().join("mi");
    let table = ok(&["mi", "--data", s(&f.data), "--grid", s(&grid), "--method", "pca", "--bins", "8", "--out", s(&out)]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5, "{table}");
    assert!(lines[0].contains("d=16") && lines[0].contains("d=64"));
    assert!(lines[1].starts_with("only proprioception") && lines[1].ends_with("encoded"));
    assert!(lines[2].ends_with("conditioned"));
    assert!(lines[3].contains("vision") && lines[3].ends_with("encoded"));
    let csv = fs::read_to_string(out.join("mi.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn probes_and_rollout_write_reports() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    for kind in ["resample", "action", "synthetic", "sweep", "rollout"] {
        let out = dir.path().join(kind);
        ok(&["probe", "--data", s(&f.data), "--checkpoint", s(&f.ckpt), "--kind", kind, "--trials", "10", "--out", s(&out)]);
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("probe.json")).unwrap()).unwrap();
        if kind == "rollout" {
            let steps = report["series"][0]["values"].as_array().unwrap().len();
            assert_eq!(steps, 3);
        }
    }
    let sweep = fs::read_to_string(dir.path().join("sweep").join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 11 * 5 * 5);

    let out = dir.path().join("roll");
    let text = ok(&["rollout", "--data", s(&f.data), "--checkpoint", s(&f.ckpt), "--horizon", "3", "--actions", "zero", "--out", s(&out)]);
    assert!(text.contains("proprio_drift"));
    assert_eq!(fs::read_to_string(out.join("rollout.csv")).unwrap().lines().count(), 4);

    let (c, _) = code(&["probe", "--data", s(&f.data), "--checkpoint", s(&f.ckpt), "--kind", "resample", "--frame", "100000", "--out", s(&out)]);
    assert_eq!(c, 2);
}

#[test]
fn thread_count_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_softsense"))
        .args(["simulate", "--frames", "5", "--out", s(dir.path())])
        .env("SOFTSENSE_THREADS", "none")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
