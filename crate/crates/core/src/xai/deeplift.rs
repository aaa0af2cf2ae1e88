use super::{channel_sum, check_input, Method, SaliencyMap};
use crate::error::{Error, Result};
use crate::model::{Layer, Sequential};
use crate::tensor::kernels::{self, ConvGeometry};
use crate::tensor::{Graph, Tensor};

/// Below this input difference the ReLU multiplier falls back to the
/// derivative at the reference.
pub const DELTA_EPS: f32 = 1e-7;

#[derive(Clone, Debug)]
pub struct DeepLift {
    /// Signed per-input contributions, `[C, H, W]`.
    pub contributions: Tensor,
    /// `logit(x) - logit(reference)` for the target class.
    pub delta: f64,
    pub map: SaliencyMap,
}

impl DeepLift {
    pub fn contribution_sum(&self) -> f64 {
        self.contributions.data().iter().map(|&v| v as f64).sum()
    }
}

/// DeepLIFT with the Rescale rule against `reference`. Max-pool multipliers
/// follow the pooling switches of the actual input.
pub fn deeplift(net: &Sequential, x: &Tensor, reference: &Tensor, class: usize) -> Result<DeepLift> {
    let classes = check_input(net, x, class)?;
    if reference.shape() != x.shape() {
        return Err(Error::shape(
            "deeplift",
            format!("reference {:?} vs input {:?}", reference.shape(), x.shape()),
        ));
    }
    let stacked = Tensor::stack(&[x, reference])?;
    let mut g = Graph::new();
    let input = g.leaf(stacked, false);
    let trace = net.trace(&mut g, input, false)?;
    let logits = g.value(trace.logits()).data();
    let delta = logits[class] as f64 - logits[classes + class] as f64;

    let mut m = vec![0.0f32; classes];
    m[class] = 1.0;
    for (i, layer) in net.layers.iter().enumerate().rev() {
        let below = if i == 0 { input } else { trace.outputs[i - 1] };
        let inp = g.value(below);
        let half = inp.len() / 2;
        m = match layer {
            Layer::Linear { weight, .. } => {
                let (o, f) = (weight.shape()[0], weight.shape()[1]);
                kernels::linear_backward_input(weight.data(), &m, 1, f, o)
            }
            Layer::Conv2d {
                weight, stride, pad, ..
            } => {
                let mut shape = inp.shape().to_vec();
                shape[0] = 1;
                let geom = ConvGeometry::new(&shape, weight.shape(), *stride, *pad)?;
                kernels::conv2d_backward_input(&geom, weight.data(), &m)
            }
            Layer::Relu => {
                let (xs, rs) = inp.data().split_at(half);
                m.iter()
                    .zip(xs.iter().zip(rs))
                    .map(|(&mo, (&a, &r))| {
                        let dx = a - r;
                        let mult = if dx.abs() > DELTA_EPS {
                            (a.max(0.0) - r.max(0.0)) / dx
                        } else if r > 0.0 {
                            1.0
                        } else {
                            0.0
                        };
                        mo * mult
                    })
                    .collect()
            }
            Layer::MaxPool2d { .. } => {
                let switches = g.switches(trace.outputs[i]).expect("pool node");
                let own = &switches[..switches.len() / 2];
                kernels::maxpool_backward(half, own, &m)
            }
            Layer::Flatten => m,
        };
    }

    let diff: Vec<f32> = x.data().iter().zip(reference.data()).map(|(a, b)| a - b).collect();
    let contrib: Vec<f32> = m.iter().zip(&diff).map(|(a, d)| a * d).collect();
    let contributions = Tensor::new(x.shape().to_vec(), contrib)?;
    contributions.ensure_finite("deeplift contributions")?;
    let (h, w, summed) = channel_sum(&contributions);
    let relu: Vec<f32> = summed.iter().map(|v| v.max(0.0)).collect();
    Ok(DeepLift {
        map: SaliencyMap::from_raw(h, w, &relu, Method::Deeplift, class)?,
        contributions,
        delta,
    })
}
