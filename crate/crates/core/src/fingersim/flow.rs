//! Dense optical-flow targets from two rendered snapshots.
//!
//! The surface point visible at a pixel in frame t is attached rigidly to its
//! primitive; its flow is the image-plane displacement of that point when the
//! primitive moves to its frame-t+1 pose.

use super::render::{Class, Raster, Snapshot};
use super::kinematics::Vec3;

/// Per-pixel `(du, dv)` in pixels, row-major HWC with two channels.
pub fn compute_flow(prev: &Snapshot, prev_raster: &Raster, next: &Snapshot) -> Vec<f32> {
    let ppm = prev.camera.pixels_per_meter;
    let mut flow = vec![0.0f32; prev_raster.width * prev_raster.height * 2];
    for row in 0..prev_raster.height {
        for col in 0..prev_raster.width {
            let k = row * prev_raster.width + col;
            let id = prev_raster.ids[k];
            let (Some(a), Some(b)) = (prev.frame_of(id), next.frame_of(id)) else { continue };
            if a == b {
                continue;
            }
            let (x, z) = prev_raster.pixel_world(row, col);
            let p = Vec3::new(x, prev_raster.depth[k], z);
            let moved = b.rotation * (a.rotation.inverse() * (p - a.origin)) + b.origin;
            flow[2 * k] = ((moved.x - p.x) * ppm) as f32;
            flow[2 * k + 1] = (-(moved.z - p.z) * ppm) as f32;
        }
    }
    flow
}

/// Fraction of frame-t+1 object pixels whose class is reproduced by pushing
/// frame-t labels along `flow`. Static pixels keep their label; a moving
/// pixel lands on the four pixels whose centers bracket its advected
/// position, so sub-pixel motion is not lost to rounding.
pub fn label_consistency(prev: &Raster, flow: &[f32], next: &Raster) -> f64 {
    let (w, h) = (prev.width, prev.height);
    let bit = |c: Class| 1u8 << (c as u8);
    let mut reach = vec![0u8; w * h];
    for k in 0..w * h {
        let (du, dv) = (flow[2 * k] as f64, flow[2 * k + 1] as f64);
        let class = prev.ids[k].class;
        if du == 0.0 && dv == 0.0 {
            reach[k] |= bit(class);
            continue;
        }
        let x = (k % w) as f64 + du;
        let y = (k / w) as f64 + dv;
        for r in [y.floor(), y.ceil()] {
            for c in [x.floor(), x.ceil()] {
                if c >= 0.0 && r >= 0.0 && (c as usize) < w && (r as usize) < h {
                    reach[r as usize * w + c as usize] |= bit(class);
                }
            }
        }
    }
    let objects: Vec<usize> = (0..w * h).filter(|&k| next.ids[k].class != Class::Background).collect();
    if objects.is_empty() {
        return 1.0;
    }
    let hits = objects.iter().filter(|&&k| reach[k] & bit(next.ids[k].class) != 0).count();
    hits as f64 / objects.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingersim::{ArmState, BoxObstacle, FingerState, SceneConfig};

    fn snap(arm: [f64; 3], finger: &FingerState, scene: &SceneConfig) -> Snapshot {
        Snapshot::capture(&ArmState { q: arm }, finger, scene).unwrap()
    }

    #[test]
    fn static_scene_has_zero_flow() {
        let scene = SceneConfig::default();
        let s = snap(scene.arm.home, &FingerState::default(), &scene);
        let flow = compute_flow(&s, &s.rasterize(), &s);
        assert!(flow.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translated_box_flows_two_pixels() {
        let mut scene = SceneConfig::default();
        scene.boxes.push(BoxObstacle { center: [0.25, 0.0, 0.03], half_extents: [0.015, 0.01, 0.015] });
        let a = snap(scene.arm.home, &FingerState::default(), &scene);
        let mut b = a.clone();
        b.boxes[0].center[0] += 2.0 / scene.camera.pixels_per_meter;
        let ra = a.rasterize();
        let flow = compute_flow(&a, &ra, &b);
        let mut seen = 0;
        for (k, id) in ra.ids.iter().enumerate() {
            let (du, dv) = (flow[2 * k], flow[2 * k + 1]);
            if id.class == Class::Box {
                assert!((du - 2.0).abs() < 1e-4 && dv.abs() < 1e-6);
                seen += 1;
            } else {
                assert_eq!((du, dv), (0.0, 0.0));
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn rigid_rotation_flow_is_linear_in_radius() {
        let mut scene = SceneConfig::default();
        scene.arm.q_min[0] = -0.0;
        let arm = [0.0, 0.02, 0.05];
        let mut moved = FingerState::default();
        let delta = 0.02;
        moved.q[0] = delta;
        let a = snap(arm, &FingerState::default(), &scene);
        let b = snap(arm, &moved, &scene);
        let ra = a.rasterize();
        let flow = compute_flow(&a, &ra, &b);
        let ppm = scene.camera.pixels_per_meter;
        let pivot = a.beam.origin;
        let mut count = 0;
        for (k, id) in ra.ids.iter().enumerate() {
            if id.class != Class::Finger {
                continue;
            }
            let (x, z) = ra.pixel_world(k / ra.width, k % ra.width);
            let radius_px = ((x - pivot.x).powi(2) + (z - pivot.z).powi(2)).sqrt() * ppm;
            let mag = (flow[2 * k] as f64).hypot(flow[2 * k + 1] as f64);
            let want = 2.0 * radius_px * (delta / 2.0).sin();
            assert!((mag - want).abs() < 1e-4 * (1.0 + want), "pixel {k}: {mag} vs {want}");
            count += 1;
        }
        assert!(count > 20);
    }

    #[test]
    fn small_motion_labels_are_reproduced() {
        let scene = SceneConfig::default();
        let mut bent = FingerState::default();
        bent.q[0] = 0.01;
        let a = snap(scene.arm.home, &FingerState::default(), &scene);
        let b = snap([0.01, 0.022, 0.052], &bent, &scene);
        let ra = a.rasterize();
        let flow = compute_flow(&a, &ra, &b);
        let c = label_consistency(&ra, &flow, &b.rasterize());
        assert!(c >= 0.95, "consistency {c}");
    }
}
