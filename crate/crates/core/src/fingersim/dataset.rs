//! On-disk dataset: `manifest.json` plus fixed-stride little-endian
//! `frames.bin` records.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::{Episode, EpisodeInfo, Frame, RATE_HZ};
use super::{SceneConfig, SimError, FINGER_JOINTS};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAGIC: [u8; 4] = *b"FSIM";
/// Magic, format version (u32) and record count (u64).
pub const HEADER_BYTES: u64 = 16;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_FILE: &str = "frames.bin";

/// Per-field shapes of one record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub q_f: usize,
    pub q_r: usize,
    pub f: usize,
    pub v: [usize; 3],
    pub flow: [usize; 3],
    pub a: usize,
}

impl Dims {
    pub fn for_image(height: usize, width: usize) -> Self {
        Self { q_f: FINGER_JOINTS, q_r: 3, f: FINGER_JOINTS, v: [height, width, 3], flow: [height, width, 2], a: 3 }
    }

    pub fn record_floats(&self) -> usize {
        self.q_f + self.q_r + self.f + self.v.iter().product::<usize>() + self.flow.iter().product::<usize>() + self.a
    }

    pub fn record_bytes(&self) -> u64 {
        4 * self.record_floats() as u64
    }

    /// Exact `frames.bin` size for `count` records.
    pub fn file_bytes(&self, count: u64) -> u64 {
        HEADER_BYTES + count * self.record_bytes()
    }
}

impl Default for Dims {
    fn default() -> Self {
        Self::for_image(64, 64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub frame_count: usize,
    pub dropped_frames: usize,
    pub dims: Dims,
    pub rate_hz: u32,
    pub seed: u64,
    /// Scene the episodes were generated from (per-episode boxes are listed
    /// under `episodes`).
    pub scene: SceneConfig,
    pub episodes: Vec<EpisodeInfo>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub frames: Vec<Frame>,
}

impl Dataset {
    pub fn from_episodes(episodes: &[Episode], scene: &SceneConfig, seed: u64) -> Self {
        let mut frames = Vec::new();
        let mut infos = Vec::new();
        for ep in episodes {
            infos.push(EpisodeInfo {
                start: frames.len(),
                count: ep.frames.len(),
                dropped: ep.dropped.clone(),
                boxes: ep.scene.boxes.clone(),
            });
            frames.extend(ep.frames.iter().cloned());
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            frame_count: frames.len(),
            dropped_frames: episodes.iter().map(|e| e.dropped.len()).sum(),
            dims: Dims::for_image(scene.camera.height, scene.camera.width),
            rate_hz: RATE_HZ,
            seed,
            scene: scene.clone(),
            episodes: infos,
        };
        Self { manifest, frames }
    }

    /// Index pairs `(t, t+1)` of frames one time step apart within the same
    /// episode; dropped steps and episode boundaries break the chain.
    pub fn transition_pairs(&self) -> Vec<(usize, usize)> {
        self.manifest.episodes.iter().flat_map(episode_pairs).collect()
    }

    /// Episode index owning each frame.
    pub fn episode_of_frames(&self) -> Vec<usize> {
        let mut owner = vec![0; self.frames.len()];
        for (e, info) in self.manifest.episodes.iter().enumerate() {
            owner[info.start..info.start + info.count].fill(e);
        }
        owner
    }
}

pub(crate) fn episode_pairs(info: &EpisodeInfo) -> Vec<(usize, usize)> {
    let steps = info.steps();
    (1..info.count)
        .filter(|&i| steps[i] == steps[i - 1] + 1)
        .map(|i| (info.start + i - 1, info.start + i))
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io { path: path.display().to_string(), source }
}

fn check_frame(frame: &Frame, dims: &Dims, index: usize) -> Result<(), SimError> {
    let (v, flow) = (dims.v.iter().product::<usize>(), dims.flow.iter().product::<usize>());
    if frame.v.len() != v || frame.flow.len() != flow {
        return Err(SimError::ShapeMismatch(format!(
            "frame {index}: image/flow lengths {}/{} but manifest says {v}/{flow}",
            frame.v.len(),
            frame.flow.len()
        )));
    }
    Ok(())
}

/// Writes `dataset` into directory `dir` (created if missing).
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<(), SimError> {
    let m = &dataset.manifest;
    if m.frame_count != dataset.frames.len() {
        return Err(SimError::ShapeMismatch(format!("manifest lists {} frames, have {}", m.frame_count, dataset.frames.len())));
    }
    if m.dims.q_f != FINGER_JOINTS || m.dims.f != FINGER_JOINTS || m.dims.q_r != 3 || m.dims.a != 3 {
        return Err(SimError::ShapeMismatch(format!("unsupported vector dims {:?}", m.dims)));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(m)?;
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;

    let path = dir.join(FRAMES_FILE);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut out = BufWriter::new(file);
    let mut header = Vec::with_capacity(HEADER_BYTES as usize);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    header.extend_from_slice(&(dataset.frames.len() as u64).to_le_bytes());
    out.write_all(&header).map_err(io_err(&path))?;
    let mut buf = Vec::with_capacity(m.dims.record_bytes() as usize);
    for (i, frame) in dataset.frames.iter().enumerate() {
        check_frame(frame, &m.dims, i)?;
        buf.clear();
        let fields: [&[f32]; 6] = [&frame.q_f, &frame.q_r, &frame.f, &frame.v, &frame.flow, &frame.a];
        for v in fields.into_iter().flatten() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf).map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, SimError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(SimError::VersionMismatch { found: m.schema_version, expected: SCHEMA_VERSION });
    }
    if m.dims.q_f != FINGER_JOINTS || m.dims.f != FINGER_JOINTS || m.dims.q_r != 3 || m.dims.a != 3 {
        return Err(SimError::ShapeMismatch(format!("unsupported vector dims {:?}", m.dims)));
    }
    if m.dims.v[2] != 3 || m.dims.flow[2] != 2 || m.dims.v[..2] != m.dims.flow[..2] {
        return Err(SimError::ShapeMismatch(format!("image dims {:?} and flow dims {:?} disagree", m.dims.v, m.dims.flow)));
    }
    let listed: usize = m.episodes.iter().map(|e| e.count).sum();
    if listed != m.frame_count {
        return Err(SimError::ShapeMismatch(format!("episodes list {listed} frames, manifest says {}", m.frame_count)));
    }
    Ok(m)
}

/// Reads a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<Dataset, SimError> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(FRAMES_FILE);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let actual = bytes.len() as u64;
    if actual < HEADER_BYTES {
        return Err(SimError::Truncated { expected: HEADER_BYTES, actual });
    }
    if bytes[..4] != MAGIC {
        return Err(SimError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != SCHEMA_VERSION {
        return Err(SimError::VersionMismatch { found: version, expected: SCHEMA_VERSION });
    }
    let dims = &manifest.dims;
    let expected = dims.file_bytes(manifest.frame_count as u64);
    if actual < expected {
        return Err(SimError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(SimError::ShapeMismatch(format!("frames.bin has {} trailing bytes", actual - expected)));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if count != manifest.frame_count as u64 {
        return Err(SimError::ShapeMismatch(format!("header holds {count} records, manifest {}", manifest.frame_count)));
    }

    let (v_len, flow_len) = (dims.v.iter().product::<usize>(), dims.flow.iter().product::<usize>());
    let frames = bytes[HEADER_BYTES as usize..]
        .chunks_exact(dims.record_bytes() as usize)
        .map(|rec| {
            let mut vals = rec.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")));
            let mut take = |n: usize| vals.by_ref().take(n).collect::<Vec<f32>>();
            let q_f = take(FINGER_JOINTS).try_into().expect("q_f");
            let q_r = take(3).try_into().expect("q_r");
            let f = take(FINGER_JOINTS).try_into().expect("f");
            let v = take(v_len);
            let flow = take(flow_len);
            let a = take(3).try_into().expect("a");
            Frame { q_f, q_r, f, v, flow, a }
        })
        .collect();
    Ok(Dataset { manifest, frames })
}
