//! Latent-space analysis: feature extraction, PCA, t-SNE and k-means.

mod cluster;
mod pca;
mod tsne;

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cluster::{adjusted_rand_index, cluster_diagnostics, kmeans, per_class_diagnostics, ClusterDiagnostics, KMeans};
pub use pca::{pca, Pca};
pub use tsne::{tsne, TsneConfig};

use crate::error::{Error, Result};
use crate::model::{LabeledSet, Model, EVAL_BATCH};
use crate::types::SongClass;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLayer {
    Penultimate,
    RawPixels,
}

impl FromStr for FeatureLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "penultimate" => Ok(FeatureLayer::Penultimate),
            "raw_pixels" | "raw-pixels" => Ok(FeatureLayer::RawPixels),
            _ => Err(Error::InvalidArgument(format!(
                "unknown feature layer '{s}' (expected penultimate or raw_pixels)"
            ))),
        }
    }
}

/// `n x d` features, row-major, with per-row labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f64>,
    pub ids: Vec<String>,
    pub classes: Vec<usize>,
    pub clusters: Vec<u32>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::shape("features", format!("{} values for {n}x{d}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature row {} column {}", i / d.max(1), i % d.max(1))));
        }
        Ok(FeatureMatrix {
            n,
            d,
            data,
            ids: (0..n).map(|i| i.to_string()).collect(),
            classes: vec![0; n],
            clusters: vec![0; n],
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// The selected rows, labels carried along.
    pub fn subset(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            n: rows.len(),
            d: self.d,
            data: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            classes: rows.iter().map(|&i| self.classes[i]).collect(),
            clusters: rows.iter().map(|&i| self.clusters[i]).collect(),
        }
    }
}

/// One feature row per sample of `set`, in set order.
pub fn extract_features(model: &Model, set: &LabeledSet, layer: FeatureLayer) -> Result<FeatureMatrix> {
    let shape = model.input_shape();
    if let Some((i, t)) = set.inputs.iter().enumerate().find(|(_, t)| t.shape() != shape) {
        return Err(Error::shape(
            "extract_features",
            format!("sample {} is {:?}, model expects {shape:?}", set.ids[i], t.shape()),
        ));
    }
    let (d, data) = match layer {
        FeatureLayer::RawPixels => {
            let d = shape.iter().product();
            (d, set.inputs.iter().flat_map(|t| t.data().iter().map(|&v| v as f64)).collect())
        }
        FeatureLayer::Penultimate => {
            let idx: Vec<usize> = (0..set.len()).collect();
            let mut data = Vec::new();
            let mut d = 0;
            for chunk in idx.chunks(EVAL_BATCH) {
                let f = model.penultimate(&set.batch(chunk)?)?;
                d = f.shape()[1];
                data.extend(f.data().iter().map(|&v| v as f64));
            }
            (d, data)
        }
    };
    let mut fm = FeatureMatrix::new(set.len(), d, data)?;
    fm.ids = set.ids.clone();
    fm.classes = set.labels.clone();
    fm.clusters = set.clusters.clone();
    Ok(fm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMethod {
    Pca,
    Tsne,
}

impl EmbedMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedMethod::Pca => "pca",
            EmbedMethod::Tsne => "tsne",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbedDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explained_variance_ratio: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
    /// KL divergence after the exaggeration phase.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_exaggeration_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_final: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding2D {
    pub coords: Vec<[f64; 2]>,
    pub method: EmbedMethod,
    pub diagnostics: EmbedDiagnostics,
}

impl Embedding2D {
    pub const CSV_HEADER: &'static str = "sample_id,class,cluster,x,y,method";

    /// `sample_id,class,cluster,x,y,method`, rows in feature order.
    pub fn to_csv(&self, fm: &FeatureMatrix) -> Result<String> {
        if fm.n != self.coords.len() {
            return Err(Error::shape("embedding csv", format!("{} rows vs {} points", fm.n, self.coords.len())));
        }
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for (i, [x, y]) in self.coords.iter().enumerate() {
            let class = SongClass::from_id(fm.classes[i]).map_or_else(|| fm.classes[i].to_string(), |c| c.as_str().to_string());
            let _ = writeln!(s, "{},{class},{},{x:.6},{y:.6},{}", fm.ids[i], fm.clusters[i], self.method.as_str());
        }
        Ok(s)
    }
}
