use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f32,
    /// Coupled L2 decay: `weight_decay * theta` is added to the gradient.
    pub weight_decay: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("weight decay must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::InvalidArgument("invalid Adam betas or epsilon".into()));
        }
        Ok(())
    }
}

/// Per-parameter first/second moments plus the shared step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Result<Self> {
        config.validate()?;
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(AdamState {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        })
    }

    /// One bias-corrected Adam update. `decay[i]` selects which parameters
    /// receive weight decay.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor], decay: &[bool]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() || decay.len() != params.len() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "{} params, {} grads, {} decay flags, {} moments",
                    params.len(),
                    grads.len(),
                    decay.len(),
                    self.first_moment.len()
                ),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first_moment[i].shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!("param {i}: {:?} vs grad {:?}", p.shape(), g.shape()),
                ));
            }
            g.ensure_finite("adam gradient")?;
        }
        let c = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - (c.beta1 as f64).powi(t);
        let bias2 = 1.0 - (c.beta2 as f64).powi(t);
        let (b1, b2) = (c.beta1 as f64, c.beta2 as f64);
        for (i, p) in params.iter_mut().enumerate() {
            let lambda = if decay[i] { c.weight_decay as f64 } else { 0.0 };
            let m = self.first_moment[i].data_mut();
            let v = self.second_moment[i].data_mut();
            for (((theta, &grad), m), v) in p.data_mut().iter_mut().zip(grads[i].data()).zip(m).zip(v) {
                let g = grad as f64 + lambda * *theta as f64;
                let mi = b1 * *m as f64 + (1.0 - b1) * g;
                let vi = b2 * *v as f64 + (1.0 - b2) * g * g;
                *m = mi as f32;
                *v = vi as f32;
                let update = c.learning_rate as f64 * (mi / bias1) / ((vi / bias2).sqrt() + c.eps as f64);
                *theta = (*theta as f64 - update) as f32;
            }
        }
        Ok(())
    }
}
