use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EmbedDiagnostics, EmbedMethod, Embedding2D, FeatureMatrix};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 42,
        }
    }
}

const ENTROPY_TOL: f64 = 1e-3;
const SEARCH_STEPS: usize = 50;
const JITTER: f64 = 1e-10;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;

fn squared_distances(x: &FeatureMatrix) -> Vec<f64> {
    let n = x.n;
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = x.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            if j != i {
                *v = xi.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            }
        }
    });
    d
}

/// Conditional distribution of row `i` at precision `beta`, with its
/// entropy in bits.
fn conditional(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let dmin = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (p, &dj)) in out.iter_mut().zip(dist).enumerate() {
        *p = if j == i { 0.0 } else { (-(dj - dmin) * beta).exp() };
        sum += *p;
    }
    let mut h = 0.0;
    for p in out.iter_mut() {
        *p /= sum;
        if *p > 0.0 {
            h -= *p * p.log2();
        }
    }
    h
}

/// Per-row binary search on the Gaussian precision so that each conditional
/// has entropy `log2(perplexity)`. Returns the rows and their entropies.
pub(crate) fn calibrate(dist: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let target = perplexity.log2();
    let mut p = vec![0.0; n * n];
    let entropies: Vec<f64> = p
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let di = &dist[i * n..(i + 1) * n];
            let spread = di.iter().copied().filter(|&v| v > 0.0).sum::<f64>() / (n - 1) as f64;
            let mut beta = if spread > 0.0 { 1.0 / spread } else { 1.0 };
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            let mut h = conditional(di, i, beta, row);
            for _ in 0..SEARCH_STEPS {
                if (h - target).abs() < ENTROPY_TOL {
                    break;
                }
                if h > target {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
                h = conditional(di, i, beta, row);
            }
            h
        })
        .collect();
    (p, entropies)
}

fn kl_divergence(p: &[f64], q_num: &[f64], q_sum: f64) -> f64 {
    p.iter()
        .zip(q_num)
        .filter(|(pij, _)| **pij > 0.0)
        .map(|(&pij, &num)| pij * (pij / (num / q_sum).max(P_FLOOR)).ln())
        .sum()
}

/// Student-t kernel values `1 / (1 + |yi - yj|^2)` (zero on the diagonal)
/// and their total.
fn q_numerators(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let row_sums: Vec<f64> = num
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let mut s = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                if j != i {
                    let dx = y[i][0] - y[j][0];
                    let dy = y[i][1] - y[j][1];
                    *v = 1.0 / (1.0 + dx * dx + dy * dy);
                    s += *v;
                }
            }
            s
        })
        .collect();
    (num, row_sums.iter().sum())
}

/// Exact t-SNE to two dimensions.
pub fn tsne(x: &FeatureMatrix, cfg: &TsneConfig) -> Result<Embedding2D> {
    let n = x.n;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("t-SNE needs at least 2 samples, got {n}")));
    }
    let mut perplexity = cfg.perplexity;
    if !(perplexity > 0.0) || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("perplexity and learning rate must be positive".into()));
    }
    if n as f64 <= 3.0 * perplexity {
        let lowered = ((n - 1) / 3) as f64;
        if lowered < 1.0 {
            return Err(Error::InvalidArgument(format!("t-SNE with {n} samples: too few for any perplexity")));
        }
        log::warn!("perplexity {perplexity} too large for {n} samples, using {lowered}");
        perplexity = lowered;
    }

    let mut rng: Rng = stream(cfg.seed, 0x5453_4E45);
    let mut xj = x.clone();
    let mut dist = squared_distances(&xj);
    let duplicates: Vec<usize> = (0..n).filter(|&i| (0..i).any(|j| dist[i * n + j] == 0.0)).collect();
    if !duplicates.is_empty() {
        let noise = Normal::new(0.0, JITTER).expect("valid sigma");
        for &i in &duplicates {
            let d = xj.d;
            for v in &mut xj.data[i * d..(i + 1) * d] {
                *v += noise.sample(&mut rng);
            }
        }
        dist = squared_distances(&xj);
    }

    let (cond, _) = calibrate(&dist, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }

    let init = Normal::new(0.0, 1e-4).expect("valid sigma");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut diagnostics = EmbedDiagnostics {
        perplexity: Some(perplexity),
        ..Default::default()
    };

    for it in 1..=cfg.iterations {
        let exaggerating = it <= cfg.exaggeration_iterations;
        let scale = if exaggerating { cfg.exaggeration } else { 1.0 };
        let momentum = if exaggerating { cfg.initial_momentum } else { cfg.final_momentum };
        let (num, q_sum) = q_numerators(&y);
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let w = (scale * p[i * n + j] - num[i * n + j] / q_sum) * num[i * n + j];
                    g[0] += 4.0 * w * (y[i][0] - y[j][0]);
                    g[1] += 4.0 * w * (y[i][1] - y[j][1]);
                }
                g
            })
            .collect();
        for i in 0..n {
            for a in 0..2 {
                let same_sign = (grad[i][a] > 0.0) == (update[i][a] > 0.0);
                gains[i][a] = if same_sign { (gains[i][a] * 0.8).max(MIN_GAIN) } else { gains[i][a] + 0.2 };
                update[i][a] = momentum * update[i][a] - cfg.learning_rate * gains[i][a] * grad[i][a];
                y[i][a] += update[i][a];
            }
        }
        let mean = y.iter().fold([0.0; 2], |m, v| [m[0] + v[0], m[1] + v[1]]);
        for v in &mut y {
            v[0] -= mean[0] / n as f64;
            v[1] -= mean[1] / n as f64;
        }
        if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::NonFinite(format!("t-SNE coordinates at iteration {it}")));
        }
        if it == cfg.exaggeration_iterations || it == cfg.iterations {
            let (num, q_sum) = q_numerators(&y);
            let kl = kl_divergence(&p, &num, q_sum);
            if !kl.is_finite() {
                return Err(Error::NonFinite(format!("t-SNE KL divergence at iteration {it}")));
            }
            if it == cfg.exaggeration_iterations {
                diagnostics.kl_exaggeration_end = Some(kl);
            }
            if it == cfg.iterations {
                diagnostics.kl_final = Some(kl);
            }
        }
    }
    Ok(Embedding2D {
        coords: y,
        method: EmbedMethod::Tsne,
        diagnostics,
    })
}
