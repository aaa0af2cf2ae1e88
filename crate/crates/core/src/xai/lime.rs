use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Method, SaliencyMap, SegmentMask};
use crate::error::{Error, Result};
use crate::model::{softmax, Model, Sequential};
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

/// Anything that maps a `[N, C, H, W]` batch to class probabilities.
pub trait ProbabilityModel {
    fn probabilities(&self, batch: &Tensor) -> Result<Vec<Vec<f32>>>;
}

impl ProbabilityModel for Sequential {
    fn probabilities(&self, batch: &Tensor) -> Result<Vec<Vec<f32>>> {
        let logits = self.forward(batch)?;
        let k = logits.shape()[1];
        Ok(logits.data().chunks(k).map(softmax).collect())
    }
}

impl ProbabilityModel for Model {
    fn probabilities(&self, batch: &Tensor) -> Result<Vec<Vec<f32>>> {
        self.net.probabilities(batch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub samples: usize,
    pub ridge_alpha: f64,
    /// Kernel width as a multiple of `sqrt(k)`.
    pub kernel_width_factor: f64,
    pub top: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            samples: 1000,
            ridge_alpha: 1.0,
            kernel_width_factor: 0.25,
            top: 5,
            batch: 16,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LimeExplanation {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub r2: f64,
    pub top_positive: Vec<usize>,
    pub map: SaliencyMap,
}

/// Cosine distance of a binary mask from the all-ones vector.
fn cosine_distance_to_ones(z: &[bool]) -> f64 {
    let on = z.iter().filter(|&&b| b).count() as f64;
    if on == 0.0 {
        return 1.0;
    }
    1.0 - on / (on.sqrt() * (z.len() as f64).sqrt())
}

/// Weighted ridge with an unpenalized intercept. Returns (coef, intercept).
fn weighted_ridge(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, alpha: f64) -> Result<(DVector<f64>, f64)> {
    let (n, p) = x.shape();
    let wsum = w.sum();
    let xm: DVector<f64> = DVector::from_iterator(p, (0..p).map(|j| (0..n).map(|i| w[i] * x[(i, j)]).sum::<f64>() / wsum));
    let ym = w.dot(y) / wsum;
    let mut xc = x.clone();
    for j in 0..p {
        for i in 0..n {
            xc[(i, j)] = (x[(i, j)] - xm[j]) * w[i].sqrt();
        }
    }
    let yc = DVector::from_iterator(n, (0..n).map(|i| (y[i] - ym) * w[i].sqrt()));
    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += alpha;
    }
    let rhs = xc.transpose() * yc;
    let coef = gram
        .cholesky()
        .ok_or_else(|| Error::NonFinite("ridge normal equations".into()))?
        .solve(&rhs);
    let intercept = ym - xm.dot(&coef);
    Ok((coef, intercept))
}

/// LIME over the superpixels of `mask`. "Off" superpixels take the
/// `off_value` intensity.
pub fn lime_explain<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &Tensor,
    mask: &SegmentMask,
    class: usize,
    off_value: f32,
    cfg: &LimeConfig,
) -> Result<LimeExplanation> {
    let k = mask.count;
    if x.ndim() != 3 || x.shape()[1] != mask.height || x.shape()[2] != mask.width {
        return Err(Error::shape(
            "lime",
            format!("input {:?} vs mask {}x{}", x.shape(), mask.height, mask.width),
        ));
    }
    if cfg.samples < k {
        return Err(Error::UnderDetermined {
            samples: cfg.samples,
            features: k,
        });
    }
    let plane = mask.height * mask.width;
    let mut rng: Rng = stream(cfg.seed, 0x4C49_4D45);
    let z: Vec<Vec<bool>> = (0..cfg.samples)
        .map(|_| (0..k).map(|_| rng.random::<bool>()).collect())
        .collect();

    let mut y = Vec::with_capacity(cfg.samples);
    for chunk in z.chunks(cfg.batch.max(1)) {
        let images: Vec<Tensor> = chunk
            .iter()
            .map(|zi| {
                let mut t = x.clone();
                for (i, v) in t.data_mut().iter_mut().enumerate() {
                    if !zi[mask.labels[i % plane] as usize] {
                        *v = off_value;
                    }
                }
                t
            })
            .collect();
        let refs: Vec<&Tensor> = images.iter().collect();
        let probs = model.probabilities(&Tensor::stack(&refs)?)?;
        for p in probs {
            let v = *p.get(class).ok_or_else(|| {
                Error::InvalidArgument(format!("target class {class} out of range for {} classes", p.len()))
            })?;
            y.push(v as f64);
        }
    }

    let sigma = cfg.kernel_width_factor * (k as f64).sqrt();
    let xm = DMatrix::from_fn(cfg.samples, k, |i, j| if z[i][j] { 1.0 } else { 0.0 });
    let yv = DVector::from_vec(y);
    let wv = DVector::from_iterator(
        cfg.samples,
        z.iter().map(|zi| (-cosine_distance_to_ones(zi).powi(2) / (sigma * sigma)).exp()),
    );
    let (coef, intercept) = weighted_ridge(&xm, &yv, &wv, cfg.ridge_alpha)?;

    let pred = &xm * &coef;
    let wsum = wv.sum();
    let ym = wv.dot(&yv) / wsum;
    let ss_res: f64 = (0..cfg.samples).map(|i| wv[i] * (yv[i] - pred[i] - intercept).powi(2)).sum();
    let ss_tot: f64 = (0..cfg.samples).map(|i| wv[i] * (yv[i] - ym).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };

    let weights: Vec<f64> = coef.iter().copied().collect();
    let mut top: Vec<usize> = (0..k).filter(|&j| weights[j] > 0.0).collect();
    top.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    top.truncate(cfg.top);
    let painted: Vec<f32> = mask.labels.iter().map(|&l| weights[l as usize].max(0.0) as f32).collect();
    Ok(LimeExplanation {
        map: SaliencyMap::from_raw(mask.height, mask.width, &painted, Method::Lime, class)?,
        weights,
        intercept,
        r2,
        top_positive: top,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_distance_cases() {
        assert_eq!(cosine_distance_to_ones(&[true; 4]), 0.0);
        assert_eq!(cosine_distance_to_ones(&[false; 4]), 1.0);
        assert!((cosine_distance_to_ones(&[true, false, false, false]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ridge_recovers_exact_line_without_penalty() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let w = DVector::from_vec(vec![1.0; 4]);
        let (c, b) = weighted_ridge(&x, &y, &w, 0.0).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }
}
