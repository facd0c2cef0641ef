//! Force information carried by the topology of the encoded and the
//! conditioned latent space, and its gain between the two.

use serde::{Deserialize, Serialize};

use super::{mutual_information, pca_project, tsne_embed, CentroidAnalysis, EmbeddingPoint, LatentSpace, LensError, TsneConfig};
use crate::cvae::{Cvae, Modality};
use crate::fingersim::Frame;

const ENCODE_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    #[default]
    Tsne,
    Pca,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LensConfig {
    pub projection: Projection,
    pub tsne: TsneConfig,
    pub bins: usize,
}

impl Default for LensConfig {
    fn default() -> Self {
        Self { projection: Projection::Tsne, tsne: TsneConfig::default(), bins: 16 }
    }
}

/// One modality configuration of the published comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableRow {
    pub name: &'static str,
    pub inputs: &'static [Modality],
    pub outputs: &'static [Modality],
    /// Published encoded-space MI and gain (%) at d = 16, 64, 128.
    pub reference: [(f64, f64); 3],
}

pub const REFERENCE_DIMS: [usize; 3] = [16, 64, 128];

pub const REFERENCE_TABLE: [TableRow; 3] = [
    TableRow {
        name: "only proprioception",
        inputs: &[Modality::Proprio],
        outputs: &[Modality::Proprio, Modality::Force],
        reference: [(0.32, 9.0), (0.33, -3.0), (0.30, 7.0)],
    },
    TableRow {
        name: "with vision as input",
        inputs: &[Modality::Proprio, Modality::Vision],
        outputs: &[Modality::Proprio, Modality::Force],
        reference: [(0.17, 88.0), (0.07, 285.0), (0.04, 650.0)],
    },
    TableRow {
        name: "with vision as input and output",
        inputs: &[Modality::Proprio, Modality::Vision],
        outputs: &[Modality::Proprio, Modality::Force, Modality::Flow],
        reference: [(0.11, 91.0), (0.04, 350.0), (0.04, 250.0)],
    },
];

impl TableRow {
    pub fn matching(inputs: &[Modality], outputs: &[Modality]) -> Option<&'static TableRow> {
        REFERENCE_TABLE.iter().find(|r| r.inputs == inputs && r.outputs == outputs)
    }

    pub fn reference_at(&self, latent_dim: usize) -> Option<(f64, f64)> {
        REFERENCE_DIMS.iter().position(|&d| d == latent_dim).map(|k| self.reference[k])
    }
}

/// `100·(conditioned − encoded)/encoded`; undefined when the encoded MI is 0.
pub fn gain_percent(encoded: f64, conditioned: f64) -> Option<f64> {
    (encoded > 0.0).then(|| 100.0 * (conditioned - encoded) / encoded)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiReport {
    /// Row name of the reference comparison, or the model label.
    pub row: String,
    pub model: String,
    pub latent_dim: usize,
    pub mi_encoded: f64,
    pub mi_conditioned: f64,
    pub gain_percent: Option<f64>,
    pub spearman_encoded: f64,
    pub spearman_conditioned: f64,
    pub bins: usize,
    pub samples: usize,
    pub projection: Projection,
    /// t-SNE perplexity used (after clipping) and whether it was clipped.
    pub perplexity: Option<f64>,
    pub perplexity_clipped: bool,
    /// Set when a distance or force variable was constant.
    pub degenerate: bool,
    /// Published values for the same row and latent size, for orientation.
    pub reference_mi_encoded: Option<f64>,
    pub reference_gain_percent: Option<f64>,
}

impl MiReport {
    pub fn from_analyses(
        model: &str,
        inputs: &[Modality],
        outputs: &[Modality],
        latent_dim: usize,
        encoded: &CentroidAnalysis,
        conditioned: &CentroidAnalysis,
        bins: usize,
    ) -> Result<Self, LensError> {
        let forces: Vec<f64> = encoded.points.iter().map(|p| p.force).collect();
        let enc = mutual_information(&encoded.distances, &forces, bins)?;
        let cond = mutual_information(&conditioned.distances, &forces, bins)?;
        let row = TableRow::matching(inputs, outputs);
        let reference = row.and_then(|r| r.reference_at(latent_dim));
        Ok(Self {
            row: row.map_or_else(|| model.to_string(), |r| r.name.to_string()),
            model: model.to_string(),
            latent_dim,
            mi_encoded: enc.bits,
            mi_conditioned: cond.bits,
            gain_percent: gain_percent(enc.bits, cond.bits),
            spearman_encoded: encoded.spearman,
            spearman_conditioned: conditioned.spearman,
            bins,
            samples: enc.samples,
            projection: Projection::Pca,
            perplexity: None,
            perplexity_clipped: false,
            degenerate: enc.degenerate || cond.degenerate,
            reference_mi_encoded: reference.map(|r| r.0),
            reference_gain_percent: reference.map(|r| r.1),
        })
    }
}

/// Both latent-space analyses behind one report row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformationGain {
    pub report: MiReport,
    pub encoded: CentroidAnalysis,
    pub conditioned: CentroidAnalysis,
}

fn to_f64(rows: Vec<Vec<f32>>) -> Vec<Vec<f64>> {
    rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect()
}

/// Posterior means of `frames` and their conditioned latents under each
/// frame's recorded action.
pub fn latents(model: &Cvae, frames: &[&Frame]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), LensError> {
    let (mut encoded, mut conditioned) = (Vec::new(), Vec::new());
    for chunk in frames.chunks(ENCODE_CHUNK) {
        let mu = model.encode(chunk)?.mu;
        let actions: Vec<[f32; 3]> = chunk.iter().map(|f| f.a).collect();
        conditioned.extend(to_f64(model.condition(&mu, &actions)?));
        encoded.extend(to_f64(mu));
    }
    Ok((encoded, conditioned))
}

/// Embeds the encoded and conditioned latents of `frames` with the same
/// projection and seed, then compares how much each space's
/// distance-to-centroid tells about the frame's total contact force.
pub fn information_gain(model: &Cvae, frames: &[&Frame], cfg: &LensConfig) -> Result<InformationGain, LensError> {
    let (enc, cond) = latents(model, frames)?;
    let forces: Vec<f64> = frames.iter().map(|f| f.force_total() as f64).collect();
    let mut tsne_info = None;
    let mut embed = |data: &[Vec<f64>], source| -> Result<CentroidAnalysis, LensError> {
        let coords = match cfg.projection {
            Projection::Pca => pca_project(data)?.points,
            Projection::Tsne => {
                let r = tsne_embed(data, &cfg.tsne)?;
                tsne_info = Some((r.perplexity, r.clipped));
                r.embedding
            }
        };
        let points = coords.into_iter().zip(&forces).map(|(y, &force)| EmbeddingPoint { y, force, source }).collect();
        CentroidAnalysis::new(points)
    };
    let encoded = embed(&enc, LatentSpace::Encoded)?;
    let conditioned = embed(&cond, LatentSpace::Conditioned)?;
    let c = &model.config;
    let mut report = MiReport::from_analyses(&c.label(), &c.inputs, &c.outputs, c.latent_dim, &encoded, &conditioned, cfg.bins)?;
    report.projection = cfg.projection;
    if let Some((p, clipped)) = tsne_info {
        report.perplexity = Some(p);
        report.perplexity_clipped = clipped;
    }
    Ok(InformationGain { report, encoded, conditioned })
}

/// Text table laid out like the reference: one row pair (encoded MI, gain)
/// per modality row, one column per latent size.
pub fn format_table(reports: &[MiReport]) -> String {
    let mut dims: Vec<usize> = reports.iter().map(|r| r.latent_dim).collect();
    dims.sort_unstable();
    dims.dedup();
    let mut rows: Vec<&str> = Vec::new();
    for r in reports {
        if !rows.contains(&r.row.as_str()) {
            rows.push(&r.row);
        }
    }
    let cell = |row: &str, d: usize, f: &dyn Fn(&MiReport) -> String| {
        reports.iter().find(|r| r.row == row && r.latent_dim == d).map_or_else(|| "-".to_string(), f)
    };
    let mut out = format!("{:<34}", "input modalities");
    for d in &dims {
        out.push_str(&format!("{:>12}", format!("d={d}")));
    }
    out.push_str("  latent space\n");
    for row in rows {
        out.push_str(&format!("{row:<34}"));
        for &d in &dims {
            out.push_str(&format!("{:>12}", cell(row, d, &|r| format!("{:.3}", r.mi_encoded))));
        }
        out.push_str("  encoded\n");
        out.push_str(&format!("{:<34}", ""));
        for &d in &dims {
            let gain = |r: &MiReport| r.gain_percent.map_or_else(|| "n/a".into(), |g| format!("{g:+.0}%"));
            out.push_str(&format!("{:>12}", cell(row, d, &gain)));
        }
        out.push_str("  conditioned\n");
    }
    out
}
