//! PNG scatter plots of 2-D embeddings colored by a scalar.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::LensError;

// Anchor colors of a perceptually monotone dark-blue → green → yellow map.
const ANCHORS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

/// Color for `t` in [0, 1] (clamped).
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (ANCHORS.len() - 1) as f64;
    let k = (x.floor() as usize).min(ANCHORS.len() - 2);
    let f = x - k as f64;
    std::array::from_fn(|c| (ANCHORS[k][c] * (1.0 - f) + ANCHORS[k + 1][c] * f).round() as u8)
}

/// Renders `points` on a white square canvas, each a 3×3 dot colored by
/// its `values` entry scaled to the range of `values`.
pub fn scatter(points: &[[f64; 2]], values: &[f64], size: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(size, size, Rgb([255, 255, 255]));
    if points.is_empty() {
        return img;
    }
    let range = |k: usize| points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
    let ((x0, x1), (y0, y1)) = (range(0), range(1));
    let (v0, v1) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let margin = 4.0;
    let span = size as f64 - 2.0 * margin;
    let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    // Low values first so the high-force points stay visible on top.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    for i in order {
        let px = (margin + scale(points[i][0], x0, x1) * span).round() as i64;
        let py = (margin + (1.0 - scale(points[i][1], y0, y1)) * span).round() as i64;
        let color = Rgb(colormap(scale(values[i], v0, v1)));
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (x, y) = (px + dx, py + dy);
                if x >= 0 && y >= 0 && x < size as i64 && y < size as i64 {
                    img.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    }
    img
}

pub fn save_scatter(path: &Path, points: &[[f64; 2]], values: &[f64], size: u32) -> Result<(), LensError> {
    scatter(points, values, size)
        .save(path)
        .map_err(|e| LensError::Output { path: path.display().to_string(), reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_is_monotone_in_brightness() {
        let lum = |c: [u8; 3]| 0.2126 * c[0] as f64 + 0.7152 * c[1] as f64 + 0.0722 * c[2] as f64;
        let mut last = -1.0;
        for k in 0..=100 {
            let l = lum(colormap(k as f64 / 100.0));
            assert!(l >= last);
            last = l;
        }
    }
}
