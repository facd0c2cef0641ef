//! Quasi-static soft-finger surrogate: kinematics, penalty contact,
//! equilibrium solve, side-view rendering, optical flow and dataset I/O.

mod config;
pub mod contact;
pub mod dataset;
pub mod episode;
pub mod flow;
pub mod kinematics;
pub mod render;
pub mod settle;

use thiserror::Error;

pub use config::{ArmConfig, BoxObstacle, CameraConfig, SceneConfig};
pub use contact::ContactRecord;
pub use dataset::{read_dataset, write_dataset, Dataset, Dims, Manifest};
pub use episode::{frames_for_duration, generate_episode, generate_episodes, Episode, EpisodeInfo, Frame, RATE_HZ};
pub use flow::compute_flow;
pub use kinematics::{forward_kinematics, ArmState, FingerState, RobotPose};
pub use render::{render, Class, Raster, Snapshot};
pub use settle::{settle, SettleOptions, SettleResult};

/// Number of passive finger joints (10 flexion plus 10 abduction).
pub const FINGER_JOINTS: usize = 20;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("joint {joint} = {value} outside [{min}, {max}]")]
    JointOutOfBounds { joint: String, value: f64, min: f64, max: f64 },
    #[error("episode needs a positive duration")]
    EmptyEpisode,
    #[error("dataset I/O on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("frames.bin is not a dataset file (bad magic)")]
    BadMagic,
    #[error("dataset schema version {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("frames.bin truncated: manifest implies {expected} bytes, file has {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}
