//! Image advection by a dense flow field and flow visualization.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::ProbeError;

/// Backward bilinear warp: `out(r, c) = image(r − dv, c − du)` with the
/// flow `(du, dv)` read at the target pixel and coordinates clamped to the
/// border. `image` is HWC with `channels` channels, `flow` HWC with two.
pub fn advect(image: &[f32], flow: &[f32], width: usize, height: usize, channels: usize) -> Vec<f32> {
    let at = |r: usize, c: usize, ch: usize| image[(r * width + c) * channels + ch];
    let mut out = vec![0.0; image.len()];
    for r in 0..height {
        for c in 0..width {
            let p = r * width + c;
            let x = (c as f32 - flow[2 * p]).clamp(0.0, (width - 1) as f32);
            let y = (r as f32 - flow[2 * p + 1]).clamp(0.0, (height - 1) as f32);
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
            let (fx, fy) = (x - x0 as f32, y - y0 as f32);
            for ch in 0..channels {
                let top = at(y0, x0, ch) * (1.0 - fx) + at(y0, x1, ch) * fx;
                let bottom = at(y1, x0, ch) * (1.0 - fx) + at(y1, x1, ch) * fx;
                out[p * channels + ch] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

/// Flow as color: hue from direction, saturation from magnitude relative
/// to `max_magnitude`, full value.
pub fn flow_to_rgb(flow: &[f32], max_magnitude: f32) -> Vec<[u8; 3]> {
    flow.chunks_exact(2)
        .map(|uv| {
            let mag = uv[0].hypot(uv[1]);
            let s = if max_magnitude > 0.0 { (mag / max_magnitude).min(1.0) } else { 0.0 };
            let hue = (uv[1].atan2(uv[0]).to_degrees() + 360.0) % 360.0;
            let sector = hue / 60.0;
            let x = 1.0 - (sector % 2.0 - 1.0).abs();
            let (r, g, b) = match sector as u32 {
                0 => (1.0, x, 0.0),
                1 => (x, 1.0, 0.0),
                2 => (0.0, 1.0, x),
                3 => (0.0, x, 1.0),
                4 => (x, 0.0, 1.0),
                _ => (1.0, 0.0, x),
            };
            // Desaturate towards white.
            [r, g, b].map(|v: f32| ((1.0 - s + s * v) * 255.0).round() as u8)
        })
        .collect()
}

/// Saves flow fields side by side as one PNG strip.
pub fn save_flow_strip(path: &Path, flows: &[Vec<f32>], width: usize, height: usize) -> Result<(), ProbeError> {
    let max = flows.iter().flatten().copied().fold(0.0f32, |m, v| m.max(v.abs())).max(1e-6);
    let mut img = RgbImage::new((width * flows.len().max(1)) as u32, height as u32);
    for (k, flow) in flows.iter().enumerate() {
        for (p, rgb) in flow_to_rgb(flow, max).into_iter().enumerate() {
            img.put_pixel((k * width + p % width) as u32, (p / width) as u32, Rgb(rgb));
        }
    }
    img.save(path).map_err(|e| ProbeError::Output { path: path.display().to_string(), reason: e.to_string() })
}
