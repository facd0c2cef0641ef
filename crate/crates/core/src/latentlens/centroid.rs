use serde::{Deserialize, Serialize};

use super::LensError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentSpace {
    Encoded,
    Conditioned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub y: [f64; 2],
    /// Total contact force of the frame (N).
    pub force: f64,
    pub source: LatentSpace,
}

/// Euclidean distance of every point to the mean point.
pub fn centroid_distances(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len().max(1) as f64;
    let s = points.iter().fold([0.0; 2], |s, p| [s[0] + p[0], s[1] + p[1]]);
    let c = [s[0] / n, s[1] / n];
    points.iter().map(|p| (p[0] - c[0]).hypot(p[1] - c[1])).collect()
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson on tie-averaged ranks). Zero when
/// either variable is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Distance-to-centroid of each embedded point against its force label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidAnalysis {
    pub points: Vec<EmbeddingPoint>,
    pub distances: Vec<f64>,
    pub spearman: f64,
}

impl CentroidAnalysis {
    pub const CSV_HEADER: &'static str = "point_id,y1,y2,force,distance";

    pub fn new(points: Vec<EmbeddingPoint>) -> Result<Self, LensError> {
        if points.len() < 10 {
            return Err(LensError::TooFewPoints { op: "centroid-distance", need: 10, got: points.len() });
        }
        let coords: Vec<[f64; 2]> = points.iter().map(|p| p.y).collect();
        let distances = centroid_distances(&coords);
        let forces: Vec<f64> = points.iter().map(|p| p.force).collect();
        let spearman = spearman(&distances, &forces);
        Ok(Self { points, distances, spearman })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for (i, (p, d)) in self.points.iter().zip(&self.distances).enumerate() {
            out.push_str(&format!("{i},{},{},{},{d}\n", p.y[0], p.y[1], p.force));
        }
        out
    }
}
