use std::f64::consts::FRAC_PI_3;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Axis-aligned box obstacle resting in the scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxObstacle {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
}

/// Cylindrical arm: rotary `q1` about the vertical axis, prismatic `q2`
/// (vertical lift) and `q3` (radial slide). The finger hangs from the
/// distal end of the radial beam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmConfig {
    /// Beam height at `q2 = 0` (m).
    pub base_height: f64,
    /// Radial reach at `q3 = 0` (m).
    pub base_reach: f64,
    pub q_min: [f64; 3],
    pub q_max: [f64; 3],
    /// Predetermined configuration every episode starts from.
    pub home: [f64; 3],
    /// Outward tilt of the finger's rest axis from vertical (rad).
    pub mount_pitch: f64,
    /// Rigid beam length and the half-width of the drawn column/beam (m).
    pub beam_length: f64,
    pub beam_half_width: f64,
    /// Radius of the static column around the base axis (m).
    pub column_radius: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            base_height: 0.21,
            base_reach: 0.10,
            q_min: [-0.6, -0.04, 0.0],
            q_max: [0.6, 0.04, 0.10],
            home: [0.0, 0.02, 0.05],
            mount_pitch: 0.2,
            beam_length: 0.08,
            beam_half_width: 0.006,
            column_radius: 0.012,
        }
    }
}

/// Static orthographic side camera looking along +y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    /// World x at the left image edge (m).
    pub x_min: f64,
    /// World z at the top image edge (m).
    pub z_max: f64,
    pub pixels_per_meter: f64,
    pub width: usize,
    pub height: usize,
    /// Drawn radius of each finger link disc (pixels).
    pub link_radius_px: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { x_min: -0.02, z_max: 0.30, pixels_per_meter: 200.0, width: 64, height: 64, link_radius_px: 1.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub boxes: Vec<BoxObstacle>,
    pub link_length: f64,
    pub link_radius: f64,
    /// Torsional spring constant of every finger joint (N·m/rad).
    pub spring_k: f64,
    /// Contact penalty stiffness (N/m).
    pub contact_k: f64,
    pub link_mass: f64,
    /// Gravity loading on link masses (m/s²); off by default.
    pub gravity: f64,
    pub ground_height: f64,
    /// Mechanical limit of every finger joint (rad).
    pub joint_limit: f64,
    /// Per-frame action bounds (|Δq1| rad, |Δq2|, |Δq3| m).
    pub action_bounds: [f64; 3],
    pub arm: ArmConfig,
    pub camera: CameraConfig,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            boxes: Vec::new(),
            link_length: 0.01,
            link_radius: 0.004,
            spring_k: 0.05,
            contact_k: 500.0,
            link_mass: 0.002,
            gravity: 0.0,
            ground_height: 0.0,
            joint_limit: FRAC_PI_3,
            action_bounds: [0.05, 0.01, 0.01],
            arm: ArmConfig::default(),
            camera: CameraConfig::default(),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |reason: String| Err(SimError::InvalidScene(reason));
        if !(self.spring_k > 0.0) || !(self.contact_k > 0.0) {
            return bad(format!("stiffnesses must be positive (k={}, k_c={})", self.spring_k, self.contact_k));
        }
        if !(self.link_length > 0.0) || !(self.link_radius > 0.0) || !(self.joint_limit > 0.0) {
            return bad("link length, radius and joint limit must be positive".into());
        }
        if self.action_bounds.iter().any(|b| !(*b >= 0.0)) {
            return bad("action bounds must be non-negative".into());
        }
        let arm = &self.arm;
        for j in 0..3 {
            if !(arm.q_min[j] <= arm.home[j] && arm.home[j] <= arm.q_max[j]) {
                return bad(format!("home joint {j} outside [{}, {}]", arm.q_min[j], arm.q_max[j]));
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if b.half_extents.iter().any(|h| !(*h > 0.0)) {
                return bad(format!("box {i} has non-positive half extents"));
            }
            // nearest point of the box footprint to the base axis
            let dx = (b.center[0].abs() - b.half_extents[0]).max(0.0);
            let dy = (b.center[1].abs() - b.half_extents[1]).max(0.0);
            if dx.hypot(dy) < arm.column_radius {
                return bad(format!("box {i} intersects the robot base"));
            }
        }
        let cam = &self.camera;
        if cam.width == 0 || cam.height == 0 || !(cam.pixels_per_meter > 0.0) {
            return bad("camera needs a positive resolution".into());
        }
        Ok(())
    }

    /// Copy of `self` with 1–3 boxes placed at random near the robot.
    pub fn with_random_boxes(&self, rng: &mut impl Rng) -> Self {
        let mut scene = self.clone();
        let count = rng.random_range(1..=3);
        let arm = &self.arm;
        let reach_lo = arm.base_reach + arm.q_min[2] + 0.02;
        let reach_hi = arm.base_reach + arm.q_max[2] + 0.06;
        scene.boxes = (0..count)
            .map(|_| {
                let radius = rng.random_range(reach_lo..reach_hi);
                let angle = rng.random_range(arm.q_min[0]..=arm.q_max[0]);
                let half = [
                    rng.random_range(0.008..0.025),
                    rng.random_range(0.008..0.025),
                    rng.random_range(0.008..0.03),
                ];
                BoxObstacle {
                    center: [radius * angle.cos(), radius * angle.sin(), self.ground_height + half[2]],
                    half_extents: half,
                }
            })
            .collect();
        scene
    }
}
