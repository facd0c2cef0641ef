//! Orthographic side-view rasterizer (camera looking along +y).
//!
//! Pixel `(row, col)` covers world `x ∈ x_min + [col, col+1)/ppm` and
//! `z ∈ z_max − [row, row+1)/ppm`; a primitive claims a pixel when the pixel
//! center lies inside it. Besides colors the rasterizer keeps, per pixel, the
//! primitive that won and the depth coordinate of the visible surface point,
//! which is all optical flow needs.

use super::kinematics::{chain, check_arm, check_finger, ArmState, FingerState, Rot3, Vec3};
use super::{BoxObstacle, CameraConfig, SceneConfig, SimError};

/// Object classes, each drawn in one fixed color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Class {
    Background,
    Ground,
    Box,
    Arm,
    Finger,
}

impl Class {
    pub fn color(self) -> [f32; 3] {
        match self {
            Class::Background => [0.92, 0.94, 0.97],
            Class::Ground => [0.42, 0.36, 0.30],
            Class::Box => [0.85, 0.33, 0.18],
            Class::Arm => [0.45, 0.47, 0.52],
            Class::Finger => [0.16, 0.62, 0.36],
        }
    }
}

/// Which primitive is visible at a pixel. Arm index 0 is the static column,
/// 1 the moving beam; box and finger indices follow scene/link order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelId {
    pub class: Class,
    pub index: u16,
}

impl PixelId {
    pub const BACKGROUND: PixelId = PixelId { class: Class::Background, index: 0 };
}

/// Rigid placement of a moving primitive: world = rotation·local + origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidFrame {
    pub origin: Vec3,
    pub rotation: Rot3,
}

/// Everything drawable in one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub camera: CameraConfig,
    pub ground_height: f64,
    pub boxes: Vec<BoxObstacle>,
    pub column: (f64, f64, f64),
    pub beam: RigidFrame,
    pub beam_length: f64,
    pub beam_half_width: f64,
    /// Link frames at the sphere centers (link tips).
    pub links: Vec<RigidFrame>,
}

impl Snapshot {
    pub fn capture(arm: &ArmState, finger: &FingerState, scene: &SceneConfig) -> Result<Self, SimError> {
        check_arm(arm, scene)?;
        check_finger(finger, scene)?;
        let pose = chain(arm, &finger.q, scene);
        let a = &scene.arm;
        Ok(Self {
            camera: scene.camera.clone(),
            ground_height: scene.ground_height,
            boxes: scene.boxes.clone(),
            column: (a.column_radius, scene.ground_height, a.base_height + a.q_max[1] + a.beam_half_width),
            beam: RigidFrame { origin: pose.mount, rotation: pose.beam_rotation },
            beam_length: a.beam_length,
            beam_half_width: a.beam_half_width,
            links: pose.links.iter().map(|l| RigidFrame { origin: l.tip, rotation: l.rotation }).collect(),
        })
    }

    /// Frame of a moving primitive, `None` for static ones.
    pub fn frame_of(&self, id: PixelId) -> Option<RigidFrame> {
        match id.class {
            Class::Background | Class::Ground => None,
            Class::Arm if id.index == 0 => None,
            Class::Arm => Some(self.beam),
            Class::Box => self.boxes.get(id.index as usize).map(|b| RigidFrame {
                origin: Vec3::from(b.center),
                rotation: Rot3::identity(),
            }),
            Class::Finger => self.links.get(id.index as usize).copied(),
        }
    }

    pub fn rasterize(&self) -> Raster {
        let cam = &self.camera;
        let mut r = Raster::blank(cam);
        let ppm = cam.pixels_per_meter;
        let to_u = |x: f64| (x - cam.x_min) * ppm;
        let to_v = |z: f64| (cam.z_max - z) * ppm;

        // ground: every pixel whose center is below the ground plane
        let v_ground = to_v(self.ground_height);
        r.fill_rect(f64::NEG_INFINITY, f64::INFINITY, v_ground, f64::INFINITY, PixelId { class: Class::Ground, index: 0 }, |_, _| 0.0);

        for (i, b) in self.boxes.iter().enumerate() {
            let id = PixelId { class: Class::Box, index: i as u16 };
            let (u0, u1) = (to_u(b.center[0] - b.half_extents[0]), to_u(b.center[0] + b.half_extents[0]));
            let (v0, v1) = (to_v(b.center[2] + b.half_extents[2]), to_v(b.center[2] - b.half_extents[2]));
            r.fill_rect(u0, u1, v0, v1, id, |_, _| b.center[1] - b.half_extents[1]);
        }

        let (col_r, col_lo, col_hi) = self.column;
        r.fill_rect(to_u(-col_r), to_u(col_r), to_v(col_hi), to_v(col_lo), PixelId { class: Class::Arm, index: 0 }, |_, _| 0.0);

        // beam: radial segment [reach − L, reach] at the mount height, yawed by q1
        let dir = self.beam.rotation * Vec3::x();
        if dir.x.abs() > 1e-9 {
            let reach = self.beam.origin.xy().norm();
            let (x0, x1) = (dir.x * (reach - self.beam_length), dir.x * reach);
            let z = self.beam.origin.z;
            let w = self.beam_half_width;
            let slope = dir.y / dir.x;
            r.fill_rect(to_u(x0.min(x1)), to_u(x0.max(x1)), to_v(z + w), to_v(z - w), PixelId { class: Class::Arm, index: 1 }, |x, _| x * slope);
        }

        let rad = cam.link_radius_px;
        for (i, link) in self.links.iter().enumerate() {
            let id = PixelId { class: Class::Finger, index: i as u16 };
            let (cu, cv) = (to_u(link.origin.x), to_v(link.origin.z));
            let y = link.origin.y;
            r.fill_where(cu - rad, cu + rad, cv - rad, cv + rad, id, |pu, pv| {
                let (du, dv) = (pu - cu, pv - cv);
                (du * du + dv * dv <= rad * rad).then_some(y)
            });
        }
        r
    }
}

/// Rasterized frame: colors plus per-pixel primitive ids and surface depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// Row-major HWC colors in [0, 1].
    pub rgb: Vec<f32>,
    pub ids: Vec<PixelId>,
    /// World y of the visible surface point.
    pub depth: Vec<f64>,
    x_min: f64,
    z_max: f64,
    ppm: f64,
}

impl Raster {
    fn blank(cam: &CameraConfig) -> Self {
        let (width, height) = (cam.width, cam.height);
        let n = width * height;
        let bg = Class::Background.color();
        Self {
            width,
            height,
            rgb: bg.iter().copied().cycle().take(3 * n).collect(),
            ids: vec![PixelId::BACKGROUND; n],
            depth: vec![0.0; n],
            x_min: cam.x_min,
            z_max: cam.z_max,
            ppm: cam.pixels_per_meter,
        }
    }

    /// World (x, z) of the center of pixel `(row, col)`.
    pub fn pixel_world(&self, row: usize, col: usize) -> (f64, f64) {
        (self.x_min + (col as f64 + 0.5) / self.ppm, self.z_max - (row as f64 + 0.5) / self.ppm)
    }

    pub fn id(&self, row: usize, col: usize) -> PixelId {
        self.ids[row * self.width + col]
    }

    pub fn count(&self, class: Class) -> usize {
        self.ids.iter().filter(|p| p.class == class).count()
    }

    fn paint(&mut self, row: usize, col: usize, id: PixelId, y: f64) {
        let k = row * self.width + col;
        self.ids[k] = id;
        self.depth[k] = y;
        self.rgb[3 * k..3 * k + 3].copy_from_slice(&id.class.color());
    }

    /// Pixel index range whose centers fall in `[lo, hi)`.
    fn span(lo: f64, hi: f64, len: usize) -> std::ops::Range<usize> {
        let first = (lo - 0.5).ceil().clamp(0.0, len as f64) as usize;
        let last = (hi - 0.5).ceil().clamp(0.0, len as f64) as usize;
        first..last.max(first)
    }

    fn fill_rect(&mut self, u0: f64, u1: f64, v0: f64, v1: f64, id: PixelId, depth: impl Fn(f64, f64) -> f64) {
        for row in Self::span(v0, v1, self.height) {
            for col in Self::span(u0, u1, self.width) {
                let (x, z) = self.pixel_world(row, col);
                self.paint(row, col, id, depth(x, z));
            }
        }
    }

    fn fill_where(&mut self, u0: f64, u1: f64, v0: f64, v1: f64, id: PixelId, inside: impl Fn(f64, f64) -> Option<f64>) {
        for row in Self::span(v0, v1 + 1e-9, self.height) {
            for col in Self::span(u0, u1 + 1e-9, self.width) {
                if let Some(y) = inside(col as f64 + 0.5, row as f64 + 0.5) {
                    self.paint(row, col, id, y);
                }
            }
        }
    }
}

/// Renders the scene as a row-major 64×64×3 (by default) RGB image.
pub fn render(arm: &ArmState, finger: &FingerState, scene: &SceneConfig) -> Result<Vec<f32>, SimError> {
    Ok(Snapshot::capture(arm, finger, scene)?.rasterize().rgb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_view() -> SceneConfig {
        // robot parked out of view: camera looks at a patch far below the arm
        let mut s = SceneConfig::default();
        s.camera.x_min = 1.0;
        s.camera.z_max = 1.0;
        s.ground_height = -5.0;
        s
    }

    fn home() -> ArmState {
        ArmState { q: SceneConfig::default().arm.home }
    }

    #[test]
    fn empty_view_is_uniform_background() {
        let r = Snapshot::capture(&home(), &FingerState::default(), &empty_view()).unwrap().rasterize();
        assert_eq!(r.count(Class::Background), 64 * 64);
        let bg = Class::Background.color();
        assert!(r.rgb.chunks(3).all(|px| px == bg));
    }

    #[test]
    fn centered_box_covers_sixteen_by_sixteen_pixels() {
        let mut s = empty_view();
        let cam = &s.camera;
        // image center in world coordinates; 8 px half extent
        let cx = cam.x_min + 32.0 / cam.pixels_per_meter;
        let cz = cam.z_max - 32.0 / cam.pixels_per_meter;
        let h = 8.0 / cam.pixels_per_meter;
        s.boxes.push(BoxObstacle { center: [cx, 0.5, cz], half_extents: [h, 0.01, h] });
        let r = Snapshot::capture(&home(), &FingerState::default(), &s).unwrap().rasterize();
        assert_eq!(r.count(Class::Box), 256);
        for row in 0..64 {
            for col in 0..64 {
                let inside = (24..40).contains(&row) && (24..40).contains(&col);
                assert_eq!(r.id(row, col).class == Class::Box, inside, "pixel ({row},{col})");
            }
        }
    }

    #[test]
    fn default_scene_shows_every_class_and_is_deterministic() {
        let mut s = SceneConfig::default();
        s.boxes.push(BoxObstacle { center: [0.22, 0.0, 0.02], half_extents: [0.02, 0.02, 0.02] });
        let a = Snapshot::capture(&home(), &FingerState::default(), &s).unwrap().rasterize();
        let b = Snapshot::capture(&home(), &FingerState::default(), &s).unwrap().rasterize();
        assert_eq!(a, b);
        for class in [Class::Background, Class::Ground, Class::Box, Class::Arm, Class::Finger] {
            assert!(a.count(class) > 0, "{class:?} missing");
        }
        assert!(a.rgb.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.rgb.len(), 64 * 64 * 3);
    }

    #[test]
    fn finger_is_drawn_over_boxes() {
        let mut s = SceneConfig::default();
        let pose = chain(&home(), &[0.0; 20], &s);
        let tip = pose.links[10].tip;
        s.boxes.push(BoxObstacle { center: [tip.x, 0.05, tip.z], half_extents: [0.02, 0.01, 0.02] });
        let r = Snapshot::capture(&home(), &FingerState::default(), &s).unwrap().rasterize();
        let cam = &s.camera;
        let col = ((tip.x - cam.x_min) * cam.pixels_per_meter) as usize;
        let row = ((cam.z_max - tip.z) * cam.pixels_per_meter) as usize;
        assert_eq!(r.id(row, col).class, Class::Finger);
    }
}
