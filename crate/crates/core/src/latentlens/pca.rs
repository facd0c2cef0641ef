use nalgebra::{DMatrix, SymmetricEigen};

use super::{check_rows, LensError};

/// Principal axes of a point cloud, strongest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Column `k` is the `k`-th unit eigenvector of the covariance.
    pub components: DMatrix<f64>,
    /// Covariance eigenvalues, descending (sample covariance, N−1).
    pub variances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaProjection {
    pub points: Vec<[f64; 2]>,
    /// Share of total variance along each of the two axes.
    pub explained: [f64; 2],
}

impl Pca {
    pub fn fit(data: &[Vec<f64>]) -> Result<Self, LensError> {
        let d = check_rows("pca", data, 3, 2)?;
        let n = data.len();
        let mut mean = vec![0.0; d];
        for row in data {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);
        let cov = centered.tr_mul(&centered) / (n - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut components = DMatrix::zeros(d, d);
        for (k, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            // Fix the sign so the largest-magnitude loading is positive.
            let pivot = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            if pivot < 0.0 {
                col.neg_mut();
            }
            components.set_column(k, &col);
        }
        let variances: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        let total: f64 = variances.iter().sum();
        if total <= f64::EPSILON * mean.iter().map(|m| m * m).sum::<f64>().max(1.0) {
            return Err(LensError::Degenerate("all points coincide (rank 0)".into()));
        }
        Ok(Self { mean, components, variances })
    }

    pub fn explained_ratio(&self) -> Vec<f64> {
        let total: f64 = self.variances.iter().sum();
        self.variances.iter().map(|v| v / total).collect()
    }

    /// Coordinates along the first `k` axes.
    pub fn project(&self, data: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
        data.iter()
            .map(|row| {
                (0..k)
                    .map(|c| self.components.column(c).iter().zip(row.iter().zip(&self.mean)).map(|(w, (x, m))| w * (x - m)).sum())
                    .collect()
            })
            .collect()
    }

    /// Maps coordinates on the first `coords[i].len()` axes back to data space.
    pub fn reconstruct(&self, coords: &[Vec<f64>]) -> Vec<Vec<f64>> {
        coords
            .iter()
            .map(|c| {
                let mut x = self.mean.clone();
                for (k, ck) in c.iter().enumerate() {
                    for (xi, w) in x.iter_mut().zip(self.components.column(k).iter()) {
                        *xi += ck * w;
                    }
                }
                x
            })
            .collect()
    }
}

pub fn pca_project(data: &[Vec<f64>]) -> Result<PcaProjection, LensError> {
    let pca = Pca::fit(data)?;
    let ratio = pca.explained_ratio();
    let points = pca.project(data, 2).into_iter().map(|p| [p[0], p[1]]).collect();
    Ok(PcaProjection { points, explained: [ratio[0], ratio[1]] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_data_projects_onto_itself() {
        let data: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 - 9.5) * 2.0, if i % 4 == 0 || i % 4 == 3 { 1.5 } else { -0.5 }]).collect();
        let p = pca_project(&data).unwrap();
        let mean1 = data.iter().map(|r| r[1]).sum::<f64>() / 20.0;
        for (pt, row) in p.points.iter().zip(&data) {
            assert!((pt[0].abs() - row[0].abs()).abs() < 1e-9);
            assert!((pt[1].abs() - (row[1] - mean1).abs()).abs() < 1e-9);
        }
        assert!(p.explained[0] + p.explained[1] <= 1.0 + 1e-12);
    }

    #[test]
    fn coincident_points_are_rejected() {
        assert!(matches!(pca_project(&vec![vec![1.0, 2.0, 3.0]; 5]), Err(LensError::Degenerate(_))));
        assert!(matches!(pca_project(&vec![vec![1.0, 2.0]; 2]), Err(LensError::TooFewPoints { .. })));
    }
}
