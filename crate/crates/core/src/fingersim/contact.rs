//! Sphere-per-link penetration against the ground plane and box obstacles.

use serde::{Deserialize, Serialize};

use super::kinematics::Vec3;
use super::{BoxObstacle, SceneConfig, FINGER_JOINTS};

/// Per-link resultant normal-force magnitudes (N).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub f: [f64; FINGER_JOINTS],
}

impl Default for ContactRecord {
    fn default() -> Self {
        Self { f: [0.0; FINGER_JOINTS] }
    }
}

impl ContactRecord {
    /// Total contact force on the finger, Σ f[i].
    pub fn total(&self) -> f64 {
        self.f.iter().sum()
    }
}

/// One sphere/obstacle overlap: depth and outward unit normal (pointing
/// from the obstacle towards the sphere center).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penetration {
    pub depth: f64,
    pub normal: Vec3,
}

pub fn ground_penetration(center: &Vec3, radius: f64, ground: f64) -> Option<Penetration> {
    let depth = radius - (center.z - ground);
    (depth > 0.0).then(|| Penetration { depth, normal: Vec3::z() })
}

pub fn box_penetration(center: &Vec3, radius: f64, b: &BoxObstacle) -> Option<Penetration> {
    let local = center - Vec3::from(b.center);
    let half = Vec3::from(b.half_extents);
    let inside = (0..3).all(|i| local[i].abs() <= half[i]);
    if inside {
        // push out through the nearest face
        let (axis, slack) = (0..3)
            .map(|i| (i, half[i] - local[i].abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("three axes");
        let mut normal = Vec3::zeros();
        normal[axis] = if local[axis] >= 0.0 { 1.0 } else { -1.0 };
        return Some(Penetration { depth: radius + slack, normal });
    }
    let closest = Vec3::from_fn(|i, _| local[i].clamp(-half[i], half[i]));
    let diff = local - closest;
    let dist = diff.norm();
    (dist < radius).then(|| Penetration { depth: radius - dist, normal: diff / dist })
}

/// All overlaps of a sphere centered at `center` with the scene.
pub fn penetrations<'a>(center: &Vec3, scene: &'a SceneConfig) -> impl Iterator<Item = Penetration> + 'a {
    let radius = scene.link_radius;
    let center = *center;
    ground_penetration(&center, radius, scene.ground_height)
        .into_iter()
        .chain(scene.boxes.iter().filter_map(move |b| box_penetration(&center, radius, b)))
}

/// Σ depth·normal over all overlaps of one sphere; its norm is the link's
/// effective penetration depth and `contact_k` times it the normal force.
pub fn penetration_vector(center: &Vec3, scene: &SceneConfig) -> Vec3 {
    penetrations(center, scene).fold(Vec3::zeros(), |acc, p| acc + p.normal * p.depth)
}

/// Contact record for sphere centers `tips`.
pub fn contact_record(tips: &[Vec3], scene: &SceneConfig) -> ContactRecord {
    let mut rec = ContactRecord::default();
    for (f, tip) in rec.f.iter_mut().zip(tips) {
        *f = scene.contact_k * penetration_vector(tip, scene).norm();
    }
    rec
}
