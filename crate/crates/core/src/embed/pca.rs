use nalgebra::DMatrix;

use super::{EmbedDiagnostics, EmbedMethod, Embedding2D, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// One unit-length row of length `d` per component.
    pub components: Vec<Vec<f64>>,
    /// Per-sample projections, `n x n_components`.
    pub scores: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl Pca {
    /// First two score columns as an embedding.
    pub fn embedding(&self) -> Result<Embedding2D> {
        if self.components.len() < 2 {
            return Err(Error::InvalidArgument("a 2-D embedding needs at least 2 components".into()));
        }
        Ok(Embedding2D {
            coords: self.scores.iter().map(|r| [r[0], r[1]]).collect(),
            method: EmbedMethod::Pca,
            diagnostics: EmbedDiagnostics {
                explained_variance_ratio: Some(self.explained_variance_ratio.clone()),
                ..Default::default()
            },
        })
    }
}

/// PCA through the SVD of the centred data. Each component is signed so
/// that its largest-magnitude loading is positive.
pub fn pca(x: &FeatureMatrix, n_components: usize) -> Result<Pca> {
    let (n, d) = (x.n, x.d);
    if n_components == 0 || n <= n_components || n_components > d {
        return Err(Error::InvalidArgument(format!(
            "PCA with {n_components} components needs more than {n_components} samples and at least {n_components} features (got {n}x{d})"
        )));
    }
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x.data[i * d + j]).sum::<f64>() / n as f64).collect();
    let centred = DMatrix::from_fn(n, d, |i, j| x.data[i * d + j] - mean[j]);
    let col_var: Vec<f64> = (0..d).map(|j| centred.column(j).norm_squared()).collect();
    if col_var.iter().all(|&v| v == 0.0) {
        let shown: Vec<String> = (0..d.min(10)).map(|j| j.to_string()).collect();
        let more = if d > 10 { format!(" and {} more", d - 10) } else { String::new() };
        return Err(Error::Data(format!(
            "zero-variance data: constant columns {}{more}",
            shown.join(", ")
        )));
    }

    let svd = centred.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::NonFinite("PCA singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut components = Vec::with_capacity(n_components);
    let mut explained_variance = Vec::with_capacity(n_components);
    let mut explained_variance_ratio = Vec::with_capacity(n_components);
    for &k in order.iter().take(n_components) {
        let mut row: Vec<f64> = v_t.row(k).iter().copied().collect();
        let mut pivot = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[pivot].abs() {
                pivot = j;
            }
        }
        if row[pivot] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        let s2 = svd.singular_values[k].powi(2);
        explained_variance.push(s2 / (n - 1) as f64);
        explained_variance_ratio.push(s2 / total);
        components.push(row);
    }
    let scores = (0..n)
        .map(|i| {
            let r = centred.row(i);
            components.iter().map(|c| r.iter().zip(c).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();
    Ok(Pca {
        mean,
        components,
        scores,
        explained_variance,
        explained_variance_ratio,
    })
}
