//! Sequential layer stacks evaluated on the autodiff tape.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::tensor::{Graph, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv2d {
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        pad: usize,
    },
    Relu,
    MaxPool2d {
        size: usize,
        stride: usize,
    },
    Flatten,
    Linear {
        weight: Tensor,
        bias: Tensor,
    },
}

impl Layer {
    /// He-uniform convolution: `U(-b, b)` with `b = sqrt(6 / fan_in)`, zero bias.
    pub fn conv_he(in_ch: usize, out_ch: usize, k: usize, stride: usize, pad: usize, seed: u64) -> Self {
        let fan_in = in_ch * k * k;
        Layer::Conv2d {
            weight: he_uniform(&[out_ch, in_ch, k, k], fan_in, seed),
            bias: Tensor::zeros(&[out_ch]),
            stride,
            pad,
        }
    }

    pub fn linear_he(in_f: usize, out_f: usize, seed: u64) -> Self {
        Layer::Linear {
            weight: he_uniform(&[out_f, in_f], in_f, seed),
            bias: Tensor::zeros(&[out_f]),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Linear { weight, bias } => vec![weight, bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Linear { weight, bias } => vec![weight, bias],
            _ => Vec::new(),
        }
    }
}

fn he_uniform(shape: &[usize], fan_in: usize, seed: u64) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let mut rng = stream(seed, 0x4845);
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| ((rng.random::<f64>() * 2.0 - 1.0) * bound) as f32)
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// Vars recorded for one forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    pub input: Var,
    /// Output of each layer, in layer order.
    pub outputs: Vec<Var>,
    /// Parameter leaves in [`Sequential::params`] order.
    pub params: Vec<Var>,
}

impl Trace {
    pub fn logits(&self) -> Var {
        *self.outputs.last().unwrap_or(&self.input)
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Sequential { layers }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// Weights decay, biases do not.
    pub fn decay_mask(&self) -> Vec<bool> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Conv2d { .. } | Layer::Linear { .. } => vec![true, false],
                _ => Vec::new(),
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Record a forward pass of `input` onto `g`.
    pub fn trace(&self, g: &mut Graph, input: Var, grad_params: bool) -> Result<Trace> {
        let mut params = Vec::new();
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input;
        for layer in &self.layers {
            x = match layer {
                Layer::Conv2d {
                    weight,
                    bias,
                    stride,
                    pad,
                } => {
                    let w = g.leaf(weight.clone(), grad_params);
                    let b = g.leaf(bias.clone(), grad_params);
                    params.extend([w, b]);
                    g.conv2d(x, w, b, *stride, *pad)?
                }
                Layer::Relu => g.relu(x),
                Layer::MaxPool2d { size, stride } => g.maxpool2d(x, *size, *stride)?,
                Layer::Flatten => g.flatten(x),
                Layer::Linear { weight, bias } => {
                    let w = g.leaf(weight.clone(), grad_params);
                    let b = g.leaf(bias.clone(), grad_params);
                    params.extend([w, b]);
                    g.linear(x, w, b)?
                }
            };
            outputs.push(x);
        }
        Ok(Trace {
            input,
            outputs,
            params,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let input = g.leaf(x.clone(), false);
        let trace = self.trace(&mut g, input, false)?;
        let out = g.into_value(trace.logits());
        out.ensure_finite("forward output")?;
        Ok(out)
    }

    /// Outputs `[N, classes]` and the gradient of output column `class`
    /// with respect to each input in the batch.
    pub fn input_gradient(&self, x: &Tensor, class: usize) -> Result<(Tensor, Tensor)> {
        let mut g = Graph::new();
        let input = g.leaf(x.clone(), true);
        let trace = self.trace(&mut g, input, false)?;
        let logits = trace.logits();
        let root = g.select_sum(logits, class)?;
        let mut grads = g.backward(root)?;
        let grad = grads.take(input).expect("input requires grad");
        grad.ensure_finite("input gradient")?;
        Ok((g.into_value(logits), grad))
    }

    /// Index of the activation following the last convolution (its ReLU if
    /// one directly follows).
    pub fn last_conv_activation(&self) -> Option<usize> {
        let conv = self
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Conv2d { .. }))?;
        match self.layers.get(conv + 1) {
            Some(Layer::Relu) => Some(conv + 1),
            _ => Some(conv),
        }
    }

    pub fn output_classes(&self) -> Result<usize> {
        match self.layers.iter().rev().find(|l| matches!(l, Layer::Linear { .. })) {
            Some(Layer::Linear { weight, .. }) => Ok(weight.shape()[0]),
            _ => Err(Error::InvalidArgument("network has no linear head".into())),
        }
    }
}

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f32]) -> Vec<f32> {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let exps: Vec<f64> = row.iter().map(|&v| (v as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| (e / sum) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_normalizes() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        let p = softmax(&[1000.0, -1000.0]);
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn he_init_is_bounded_and_seeded() {
        let a = Layer::linear_he(50, 4, 3);
        let b = Layer::linear_he(50, 4, 3);
        assert_eq!(a, b);
        let bound = (6.0f32 / 50.0).sqrt();
        assert!(a.params()[0].data().iter().all(|v| v.abs() <= bound));
        assert!(a.params()[1].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_net_input_gradient_is_weight_row() {
        let net = Sequential::new(vec![
            Layer::Flatten,
            Layer::Linear {
                weight: Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap(),
                bias: Tensor::new(vec![2], vec![0.1, 0.2]).unwrap(),
            },
        ]);
        let x = Tensor::new(vec![2, 3], vec![1.0, 1.0, 1.0, 0.0, 2.0, 0.0]).unwrap();
        let (out, grad) = net.input_gradient(&x, 1).unwrap();
        assert_eq!(out.shape(), &[2, 2]);
        assert_eq!(grad.data(), &[-1.0, 0.5, 0.0, -1.0, 0.5, 0.0]);
    }
}
