//! Seeded random-actuation episodes at 10 Hz.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::compute_flow;
use super::kinematics::{ArmState, FingerState};
use super::render::Snapshot;
use super::settle::{settle, SettleOptions};
use super::{BoxObstacle, SceneConfig, SimError, FINGER_JOINTS};
use crate::seed::{indexed_rng, Stream};

/// Capture rate of the sensor streams.
pub const RATE_HZ: u32 = 10;

/// One multi-modal observation together with the action taken after it and
/// the optical flow it produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub q_f: [f32; FINGER_JOINTS],
    pub q_r: [f32; 3],
    pub f: [f32; FINGER_JOINTS],
    /// Row-major HWC RGB image.
    pub v: Vec<f32>,
    /// Row-major HWC `(du, dv)` flow from this frame to the next.
    pub flow: Vec<f32>,
    pub a: [f32; 3],
}

impl Frame {
    /// Total contact force on the finger.
    pub fn force_total(&self) -> f32 {
        self.f.iter().sum()
    }

    /// Arm and finger joints as one 23-vector (finger first).
    pub fn proprio(&self) -> [f32; 23] {
        let mut p = [0.0; 23];
        p[..FINGER_JOINTS].copy_from_slice(&self.q_f);
        p[FINGER_JOINTS..].copy_from_slice(&self.q_r);
        p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub scene: SceneConfig,
    /// Kept frames in time order.
    pub frames: Vec<Frame>,
    /// Time-step index of every kept frame; gaps mark dropped frames.
    pub steps: Vec<u32>,
    /// Steps whose equilibrium solve did not converge.
    pub dropped: Vec<u32>,
}

/// Number of frames captured over `seconds` of simulated time.
pub fn frames_for_duration(seconds: f64) -> usize {
    (seconds * RATE_HZ as f64).round() as usize
}

fn draw_action(rng: &mut impl Rng, bounds: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| if bounds[i] > 0.0 { rng.random_range(-bounds[i]..=bounds[i]) } else { 0.0 })
}

/// Simulates `frames` steps from the home configuration.
///
/// Each step settles the finger (warm-started from the previous step),
/// renders, applies the drawn action to the arm with joint clamping, and
/// records the flow towards the following state; one extra state is settled
/// at the end so the last frame also has a flow target.
pub fn generate_episode(scene: &SceneConfig, frames: usize, rng: &mut impl Rng) -> Result<Episode, SimError> {
    if frames == 0 {
        return Err(SimError::EmptyEpisode);
    }
    scene.validate()?;
    let opts = SettleOptions::default();
    let arm_cfg = &scene.arm;
    let mut arm = ArmState { q: arm_cfg.home };
    let mut state = settle(&arm, scene, &FingerState::default(), &opts)?;
    let mut snap = Snapshot::capture(&arm, &state.finger, scene)?;
    let mut episode = Episode { scene: scene.clone(), frames: Vec::with_capacity(frames), steps: Vec::new(), dropped: Vec::new() };

    for step in 0..frames as u32 {
        let action = draw_action(rng, &scene.action_bounds);
        let next_arm = ArmState { q: std::array::from_fn(|j| (arm.q[j] + action[j]).clamp(arm_cfg.q_min[j], arm_cfg.q_max[j])) };
        let next = settle(&next_arm, scene, &state.finger, &opts)?;
        let next_snap = Snapshot::capture(&next_arm, &next.finger, scene)?;

        if state.converged {
            let raster = snap.rasterize();
            let flow = compute_flow(&snap, &raster, &next_snap);
            episode.frames.push(Frame {
                q_f: state.finger.q.map(|v| v as f32),
                q_r: arm.q.map(|v| v as f32),
                f: state.contact.f.map(|v| v as f32),
                v: raster.rgb,
                flow,
                a: action.map(|v| v as f32),
            });
            episode.steps.push(step);
        } else {
            episode.dropped.push(step);
        }
        arm = next_arm;
        state = next;
        snap = next_snap;
    }
    Ok(episode)
}

/// Per-episode entry of a dataset manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeInfo {
    /// Index of the episode's first frame in `frames.bin`.
    pub start: usize,
    pub count: usize,
    /// Dropped time steps within the episode.
    pub dropped: Vec<u32>,
    pub boxes: Vec<BoxObstacle>,
}

impl EpisodeInfo {
    /// Time-step index of each stored frame.
    pub fn steps(&self) -> Vec<u32> {
        let mut steps = Vec::with_capacity(self.count);
        let mut t = 0u32;
        while steps.len() < self.count {
            if !self.dropped.contains(&t) {
                steps.push(t);
            }
            t += 1;
        }
        steps
    }
}

/// Generates `total` frames split into episodes of `per_episode` steps
/// (the last one may be shorter). When `randomize_boxes` is set, every
/// episode places its own 1–3 boxes. Episodes run in parallel; each draws
/// from its own indexed random stream, so the output is independent of the
/// thread count.
pub fn generate_episodes(
    scene: &SceneConfig,
    total: usize,
    per_episode: usize,
    seed: u64,
    randomize_boxes: bool,
) -> Result<Vec<Episode>, SimError> {
    if total == 0 || per_episode == 0 {
        return Err(SimError::EmptyEpisode);
    }
    let lengths: Vec<usize> = (0..total.div_ceil(per_episode)).map(|i| per_episode.min(total - i * per_episode)).collect();
    lengths
        .par_iter()
        .enumerate()
        .map(|(i, &len)| {
            let mut rng = indexed_rng(seed, Stream::Sim, i as u32);
            let ep_scene = if randomize_boxes { scene.with_random_boxes(&mut rng) } else { scene.clone() };
            generate_episode(&ep_scene, len, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> SceneConfig {
        let mut s = SceneConfig::default();
        s.boxes.push(BoxObstacle { center: [0.2, 0.0, 0.03], half_extents: [0.02, 0.03, 0.03] });
        s
    }

    #[test]
    fn ten_seconds_is_a_hundred_frames() {
        assert_eq!(frames_for_duration(10.0), 100);
        let ep = generate_episode(&scene(), frames_for_duration(1.0), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(ep.frames.len() + ep.dropped.len(), 10);
    }

    #[test]
    fn same_seed_same_episode() {
        let a = generate_episode(&scene(), 8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = generate_episode(&scene(), 8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let c = generate_episode(&scene(), 8, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_ne!(a.frames, c.frames);
    }

    #[test]
    fn zero_bounds_freeze_the_scene() {
        let mut s = scene();
        s.action_bounds = [0.0; 3];
        let ep = generate_episode(&s, 5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(ep.frames.len(), 5);
        assert!(ep.frames.windows(2).all(|w| w[0] == w[1]));
        assert!(ep.frames.iter().all(|f| f.flow.iter().all(|&v| v == 0.0) && f.a == [0.0; 3]));
    }

    #[test]
    fn actions_respect_bounds_and_arm_stays_in_limits() {
        let s = scene();
        let ep = generate_episode(&s, 30, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for f in &ep.frames {
            for j in 0..3 {
                assert!((f.a[j] as f64).abs() <= s.action_bounds[j] + 1e-7);
                assert!(f.q_r[j] as f64 >= s.arm.q_min[j] - 1e-6 && f.q_r[j] as f64 <= s.arm.q_max[j] + 1e-6);
            }
        }
        assert_eq!(ep.frames[0].q_r, s.arm.home.map(|v| v as f32));
    }

    #[test]
    fn parallel_generation_is_seeded_per_episode() {
        let s = SceneConfig::default();
        let a = generate_episodes(&s, 7, 3, 11, true).unwrap();
        assert_eq!(a.iter().map(|e| e.frames.len() + e.dropped.len()).collect::<Vec<_>>(), [3, 3, 1]);
        let b = generate_episodes(&s, 7, 3, 11, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].scene.boxes, a[1].scene.boxes);
    }

    #[test]
    fn steps_skip_dropped_frames() {
        let info = EpisodeInfo { start: 0, count: 4, dropped: vec![1, 3], boxes: vec![] };
        assert_eq!(info.steps(), [0, 2, 4, 5]);
    }
}
