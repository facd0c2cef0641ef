//! Interpretation of learned latent spaces: linear and neighbour-preserving
//! 2-D projections, centroid-distance analysis against contact force, and
//! the change in force information between encoded and conditioned latents.

mod centroid;
mod cluster;
mod mi;
mod pca;
pub mod plot;
mod report;
mod tsne;

use thiserror::Error;

use crate::cvae::CvaeError;

pub use centroid::{centroid_distances, spearman, CentroidAnalysis, EmbeddingPoint, LatentSpace};
pub use cluster::{kmeans, purity};
pub use mi::{mutual_information, MiEstimate};
pub use pca::{pca_project, Pca, PcaProjection};
pub use report::{
    format_table, gain_percent, information_gain, latents, InformationGain, LensConfig, MiReport, Projection, TableRow,
    REFERENCE_DIMS, REFERENCE_TABLE,
};
pub use tsne::{conditional_affinities, joint_affinities, perplexity_sweep, tsne_embed, SweepRow, TsneConfig, TsneResult};

#[derive(Debug, Error)]
pub enum LensError {
    #[error("{op} needs at least {need} points, got {got}")]
    TooFewPoints { op: &'static str, need: usize, got: usize },
    #[error("{op}: {reason}")]
    InvalidInput { op: &'static str, reason: String },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Model(#[from] CvaeError),
    #[error("writing {path}: {reason}")]
    Output { path: String, reason: String },
}

fn check_rows(op: &'static str, data: &[Vec<f64>], min_rows: usize, min_cols: usize) -> Result<usize, LensError> {
    if data.len() < min_rows {
        return Err(LensError::TooFewPoints { op, need: min_rows, got: data.len() });
    }
    let d = data[0].len();
    if d < min_cols {
        return Err(LensError::InvalidInput { op, reason: format!("need at least {min_cols} columns, got {d}") });
    }
    if data.iter().any(|r| r.len() != d) {
        return Err(LensError::InvalidInput { op, reason: "rows differ in length".into() });
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LensError::InvalidInput { op, reason: "non-finite value".into() });
    }
    Ok(d)
}
