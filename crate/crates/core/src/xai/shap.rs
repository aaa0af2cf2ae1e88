use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{channel_sum, check_input, Method, SaliencyMap};
use crate::error::{Error, Result};
use crate::model::Sequential;
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    pub background_count: usize,
    pub interpolation_samples: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            background_count: 50,
            interpolation_samples: 8,
            batch: 16,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ShapExplanation {
    /// Signed attributions, `[C, H, W]`.
    pub attributions: Tensor,
    pub map: SaliencyMap,
}

/// Expected gradients of the target logit: the mean over backgrounds `b`
/// and `u ~ U(0, 1)` of `(x - b) * grad f(b + u (x - b))`.
pub fn shap_explain(net: &Sequential, x: &Tensor, backgrounds: &[Tensor], class: usize, cfg: &ShapConfig) -> Result<ShapExplanation> {
    check_input(net, x, class)?;
    if backgrounds.is_empty() {
        return Err(Error::InvalidArgument("SHAP needs at least one background sample".into()));
    }
    if cfg.interpolation_samples == 0 {
        return Err(Error::InvalidArgument("interpolation_samples must be at least 1".into()));
    }
    if let Some(b) = backgrounds.iter().find(|b| b.shape() != x.shape()) {
        return Err(Error::shape("shap", format!("background {:?} vs input {:?}", b.shape(), x.shape())));
    }
    let mut rng: Rng = stream(cfg.seed, 0x5348_4150);
    // Stratified path positions: draw s of each background falls in the
    // s-th of `interpolation_samples` equal slices of [0, 1].
    let n_interp = cfg.interpolation_samples;
    let draws: Vec<(usize, f32)> = (0..backgrounds.len())
        .flat_map(|b| (0..n_interp).map(move |s| (b, s)))
        .map(|(b, s)| (b, ((s as f64 + rng.random::<f64>()) / n_interp as f64) as f32))
        .collect();

    let mut acc = vec![0.0f64; x.len()];
    for chunk in draws.chunks(cfg.batch.max(1)) {
        let points: Vec<Tensor> = chunk
            .iter()
            .map(|&(b, u)| {
                let data = x
                    .data()
                    .iter()
                    .zip(backgrounds[b].data())
                    .map(|(&xi, &bi)| bi + u * (xi - bi))
                    .collect();
                Tensor::new(x.shape().to_vec(), data)
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&Tensor> = points.iter().collect();
        let (_, grad) = net.input_gradient(&Tensor::stack(&refs)?, class)?;
        for (&(b, _), g) in chunk.iter().zip(grad.data().chunks(x.len())) {
            for ((a, &gi), (&xi, &bi)) in acc.iter_mut().zip(g).zip(x.data().iter().zip(backgrounds[b].data())) {
                *a += (xi - bi) as f64 * gi as f64;
            }
        }
    }
    let n = draws.len() as f64;
    let attributions = Tensor::new(x.shape().to_vec(), acc.into_iter().map(|v| (v / n) as f32).collect())?;
    let (h, w, summed) = channel_sum(&attributions);
    let relu: Vec<f32> = summed.iter().map(|v| v.max(0.0)).collect();
    Ok(ShapExplanation {
        map: SaliencyMap::from_raw(h, w, &relu, Method::Shap, class)?,
        attributions,
    })
}
