//! Lloyd's k-means on 2-D embeddings and label purity, used to score how
//! well a projection separates known groups.

use rand::Rng;

use crate::seed::{indexed_rng, Stream};

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Cluster index of every point; k-means++ seeding, at most 300 rounds.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let mut rng = indexed_rng(seed, Stream::Tsne, 1);
    let mut centers = vec![points[rng.random_range(0..n)]];
    while centers.len() < k.min(n) {
        let d: Vec<f64> = points.iter().map(|p| centers.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        if total == 0.0 {
            break;
        }
        let mut r = rng.random_range(0.0..total);
        let pick = d.iter().position(|&w| {
            r -= w;
            r < 0.0
        });
        centers.push(points[pick.unwrap_or(n - 1)]);
    }
    let mut labels = vec![0; n];
    for _ in 0..300 {
        let next: Vec<usize> = points
            .iter()
            .map(|p| (0..centers.len()).min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b]))).unwrap_or(0))
            .collect();
        let changed = next != labels;
        labels = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&[f64; 2]> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if !members.is_empty() {
                let m = members.len() as f64;
                *center = members.iter().fold([0.0; 2], |s, p| [s[0] + p[0] / m, s[1] + p[1] / m]);
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Fraction of points whose true label is the majority label of their cluster.
pub fn purity(clusters: &[usize], truth: &[usize]) -> f64 {
    let k = clusters.iter().max().map_or(0, |m| m + 1);
    let t = truth.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k * t];
    for (&c, &l) in clusters.iter().zip(truth) {
        counts[c * t + l] += 1;
    }
    let majority: usize = counts.chunks(t.max(1)).map(|row| row.iter().copied().max().unwrap_or(0)).sum();
    majority as f64 / clusters.len().max(1) as f64
}
