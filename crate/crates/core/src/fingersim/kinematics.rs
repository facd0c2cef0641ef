use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::{SceneConfig, SimError, FINGER_JOINTS};

pub type Vec3 = Vector3<f64>;
pub type Rot3 = Rotation3<f64>;

/// Rigid arm joints `[q1 (rad), q2 (m), q3 (m)]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub q: [f64; 3],
}

/// Finger joint angles, flexion/extension and adduction/abduction
/// interleaved from base to tip (even indices FE, odd indices AA).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerState {
    pub q: [f64; FINGER_JOINTS],
}

impl Default for FingerState {
    fn default() -> Self {
        Self { q: [0.0; FINGER_JOINTS] }
    }
}

impl FingerState {
    pub fn flexion(&self) -> impl Iterator<Item = f64> + '_ {
        self.q.iter().step_by(2).copied()
    }

    pub fn abduction(&self) -> impl Iterator<Item = f64> + '_ {
        self.q.iter().skip(1).step_by(2).copied()
    }
}

/// Kind of rotation axis of a finger joint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointAxis {
    FlexExtend,
    AdductAbduct,
}

pub fn joint_axis(index: usize) -> JointAxis {
    if index.is_multiple_of(2) {
        JointAxis::FlexExtend
    } else {
        JointAxis::AdductAbduct
    }
}

fn local_axis(index: usize) -> Vec3 {
    match joint_axis(index) {
        // bends the finger in the radial/vertical plane
        JointAxis::FlexExtend => Vec3::y(),
        JointAxis::AdductAbduct => Vec3::x(),
    }
}

/// World frame of one finger link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkFrame {
    /// Position of the joint at the proximal end of the link.
    pub origin: Vec3,
    /// Orientation after the link's joint rotation.
    pub rotation: Rot3,
    /// Distal end of the link; the link's contact sphere sits here.
    pub tip: Vec3,
    /// World rotation axis of the link's joint.
    pub axis: Vec3,
}

/// Forward-kinematics result for arm plus finger.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotPose {
    /// Finger mount point at the end of the beam.
    pub mount: Vec3,
    /// Orientation of the beam (yaw by `q1`).
    pub beam_rotation: Rot3,
    pub links: Vec<LinkFrame>,
}

impl RobotPose {
    pub fn tip(&self) -> Vec3 {
        self.links.last().map(|l| l.tip).unwrap_or(self.mount)
    }
}

pub fn check_arm(arm: &ArmState, scene: &SceneConfig) -> Result<(), SimError> {
    for j in 0..3 {
        let (lo, hi) = (scene.arm.q_min[j], scene.arm.q_max[j]);
        let v = arm.q[j];
        if !(lo - 1e-12..=hi + 1e-12).contains(&v) {
            return Err(SimError::JointOutOfBounds { joint: format!("q{}", j + 1), value: v, min: lo, max: hi });
        }
    }
    Ok(())
}

pub fn check_finger(finger: &FingerState, scene: &SceneConfig) -> Result<(), SimError> {
    let lim = scene.joint_limit;
    for (i, &v) in finger.q.iter().enumerate() {
        if !(v.abs() <= lim + 1e-12) {
            return Err(SimError::JointOutOfBounds { joint: format!("finger[{i}]"), value: v, min: -lim, max: lim });
        }
    }
    Ok(())
}

/// Mount point and rest orientation of the finger for an arm configuration.
pub(crate) fn mount_frame(arm: &ArmState, scene: &SceneConfig) -> (Vec3, Rot3, Rot3) {
    let [q1, q2, q3] = arm.q;
    let reach = scene.arm.base_reach + q3;
    let height = scene.arm.base_height + q2;
    let yaw = Rot3::from_axis_angle(&Vec3::z_axis(), q1);
    let mount = Vec3::new(reach * q1.cos(), reach * q1.sin(), height);
    // negative pitch about local y tilts the downward rest axis outward (+radial)
    let pitch = Rot3::from_axis_angle(&Vec3::y_axis(), -scene.arm.mount_pitch);
    (mount, yaw, yaw * pitch)
}

/// Chains the 20 link frames from the arm tip without bounds checks.
pub(crate) fn chain(arm: &ArmState, q: &[f64; FINGER_JOINTS], scene: &SceneConfig) -> RobotPose {
    let (mount, beam_rotation, mut rot) = mount_frame(arm, scene);
    let step = Vec3::new(0.0, 0.0, -scene.link_length);
    let mut origin = mount;
    let mut links = Vec::with_capacity(FINGER_JOINTS);
    for (i, &angle) in q.iter().enumerate() {
        let axis = rot * local_axis(i);
        rot *= Rot3::from_axis_angle(&nalgebra::Unit::new_unchecked(local_axis(i)), angle);
        let tip = origin + rot * step;
        links.push(LinkFrame { origin, rotation: rot, tip, axis });
        origin = tip;
    }
    RobotPose { mount, beam_rotation, links }
}

/// Per-link frames of the finger for the given arm and finger joints.
pub fn forward_kinematics(arm: &ArmState, finger: &FingerState, scene: &SceneConfig) -> Result<RobotPose, SimError> {
    check_arm(arm, scene)?;
    check_finger(finger, scene)?;
    Ok(chain(arm, &finger.q, scene))
}
