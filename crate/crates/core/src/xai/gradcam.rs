use super::{as_batch, check_input, upsample_bilinear, Method, SaliencyMap};
use crate::error::{Error, Result};
use crate::model::Sequential;
use crate::tensor::{Graph, Tensor};

/// Grad-CAM result: channel weights, the raw and normalized low-resolution
/// maps, and the upsampled saliency.
#[derive(Clone, Debug)]
pub struct GradCam {
    pub weights: Vec<f32>,
    pub grid: (usize, usize),
    pub raw: Vec<f32>,
    pub map: SaliencyMap,
}

/// `ReLU(sum_k alpha_k A_k)` with `alpha_k` the spatial mean of `dA_k`.
/// Both tensors are `[K, h, w]`.
pub fn gradcam_raw(activations: &Tensor, gradients: &Tensor) -> Result<(Vec<f32>, Vec<f32>)> {
    if activations.ndim() != 3 || activations.shape() != gradients.shape() {
        return Err(Error::shape(
            "gradcam",
            format!("activations {:?} vs gradients {:?}", activations.shape(), gradients.shape()),
        ));
    }
    let plane = activations.shape()[1] * activations.shape()[2];
    let weights: Vec<f32> = gradients
        .data()
        .chunks(plane)
        .map(|g| (g.iter().map(|&v| v as f64).sum::<f64>() / plane as f64) as f32)
        .collect();
    let mut acc = vec![0.0f64; plane];
    for (a, &alpha) in activations.data().chunks(plane).zip(&weights) {
        for (o, &v) in acc.iter_mut().zip(a) {
            *o += alpha as f64 * v as f64;
        }
    }
    Ok((weights, acc.into_iter().map(|v| v.max(0.0) as f32).collect()))
}

/// Grad-CAM at the activation following the last convolution.
pub fn gradcam(net: &Sequential, x: &Tensor, class: usize) -> Result<GradCam> {
    check_input(net, x, class)?;
    let layer = net
        .last_conv_activation()
        .ok_or_else(|| Error::InvalidArgument("network has no convolution".into()))?;
    let mut g = Graph::new();
    let input = g.leaf(as_batch(x)?, true);
    let trace = net.trace(&mut g, input, false)?;
    let target = trace.outputs[layer];
    g.retain_grad(target);
    let root = g.select_sum(trace.logits(), class)?;
    let grads = g.backward(root)?;
    let a = g.value(target).slice0(0);
    let da = grads
        .get(target)
        .map(|t| t.slice0(0))
        .unwrap_or_else(|| Tensor::zeros(a.shape()));
    let (weights, raw) = gradcam_raw(&a, &da)?;
    let (gh, gw) = (a.shape()[1], a.shape()[2]);
    let low = super::normalize_minmax(&raw, super::NORM_EPS)?;
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let up = upsample_bilinear(&low, gh, gw, h, w);
    Ok(GradCam {
        weights,
        grid: (gh, gw),
        raw,
        map: SaliencyMap::from_raw(h, w, &up, Method::Gradcam, class)?,
    })
}
