use serde::{Deserialize, Serialize};

use super::nn::{softmax, Layer, Sequential};
use crate::dsp::SpectrogramImage;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::tensor::{Graph, Tensor};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub padding: usize,
    pub conv_stride: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub fc_sizes: Vec<usize>,
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    /// Require every pool to divide its input exactly.
    pub exact_pooling: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ModelConfig {
    /// 1×480×960 input, five conv blocks, exact pooling.
    pub fn canonical() -> Self {
        ModelConfig {
            conv_channels: vec![16, 32, 64, 128, 256],
            kernel_size: 3,
            padding: 1,
            conv_stride: 1,
            pool_size: 2,
            pool_stride: 2,
            fc_sizes: vec![512, 1024, 2],
            input_channels: 1,
            input_height: 480,
            input_width: 960,
            exact_pooling: true,
        }
    }

    /// Canonical layers on an arbitrary input size, floor pooling.
    pub fn for_input(height: usize, width: usize) -> Self {
        ModelConfig {
            input_height: height,
            input_width: width,
            exact_pooling: false,
            ..Self::canonical()
        }
    }

    pub fn classes(&self) -> usize {
        self.fc_sizes.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.kernel_size,
            self.conv_stride,
            self.pool_size,
            self.pool_stride,
            self.input_channels,
            self.input_height,
            self.input_width,
        ];
        if positive.contains(&0) || self.conv_channels.contains(&0) || self.fc_sizes.contains(&0) {
            return Err(Error::InvalidArgument("model sizes must be positive".into()));
        }
        if self.conv_channels.is_empty() {
            return Err(Error::InvalidArgument("at least one conv block required".into()));
        }
        if self.classes() < 2 {
            return Err(Error::InvalidArgument("classifier needs at least 2 outputs".into()));
        }
        self.feature_grid().map(|_| ())
    }

    /// Spatial extent after the last pool.
    pub fn feature_grid(&self) -> Result<(usize, usize)> {
        let (mut h, mut w) = (self.input_height, self.input_width);
        let blocks = self.conv_channels.len();
        for _ in 0..blocks {
            let k = self.kernel_size;
            let p = 2 * self.padding;
            for d in [&mut h, &mut w] {
                if *d + p < k || (*d + p - k) % self.conv_stride != 0 {
                    return Err(self.geometry_error());
                }
                *d = (*d + p - k) / self.conv_stride + 1;
                if *d < self.pool_size {
                    return Err(self.geometry_error());
                }
                let rem = (*d - self.pool_size) % self.pool_stride;
                if self.exact_pooling && (rem != 0 || *d % self.pool_stride != 0) {
                    return Err(self.geometry_error());
                }
                *d = (*d - self.pool_size) / self.pool_stride + 1;
            }
        }
        Ok((h, w))
    }

    fn geometry_error(&self) -> Error {
        let factor = self.pool_stride.pow(self.conv_channels.len() as u32);
        let detail = if self.exact_pooling {
            format!("not divisible by {factor} per axis")
        } else {
            "too small for the conv/pool stack".to_string()
        };
        Error::InvalidArgument(format!(
            "input {}x{} {detail}",
            self.input_height, self.input_width
        ))
    }

    pub fn flatten_size(&self) -> Result<usize> {
        let (h, w) = self.feature_grid()?;
        Ok(self.conv_channels.last().copied().unwrap_or(0) * h * w)
    }

    pub fn conv_parameter_count(&self) -> usize {
        let k2 = self.kernel_size * self.kernel_size;
        let mut cin = self.input_channels;
        let mut total = 0;
        for &c in &self.conv_channels {
            total += c * cin * k2 + c;
            cin = c;
        }
        total
    }

    pub fn fc_parameter_count(&self) -> Result<usize> {
        let mut fin = self.flatten_size()?;
        let mut total = 0;
        for &o in &self.fc_sizes {
            total += o * fin + o;
            fin = o;
        }
        Ok(total)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self.conv_parameter_count() + self.fc_parameter_count()?)
    }
}

/// The CNN classifier: config plus its layer stack.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub net: Sequential,
}

/// Post-ReLU conv maps (one per block, batch axis dropped) and the
/// pre-classifier feature vector.
#[derive(Clone, Debug)]
pub struct ActivationCache {
    pub conv_maps: Vec<Tensor>,
    pub penultimate: Tensor,
}

#[derive(Clone, Debug)]
pub struct Prediction {
    pub probabilities: Vec<f32>,
    pub logits: Vec<f32>,
    pub cache: ActivationCache,
}

impl Prediction {
    pub fn class(&self) -> usize {
        argmax(&self.logits)
    }
}

pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model> {
    assemble(config, Some(seed))
}

/// Same layout as [`build_model`], parameters zero-filled.
pub(crate) fn assemble(config: &ModelConfig, seed: Option<u64>) -> Result<Model> {
    config.validate()?;
    let layer_seed = |i: usize| seed.map(|s| derive_seed(s, i as u64));
    let mut layers = Vec::new();
    let mut cin = config.input_channels;
    for (i, &c) in config.conv_channels.iter().enumerate() {
        let k = config.kernel_size;
        layers.push(match layer_seed(i) {
            Some(s) => Layer::conv_he(cin, c, k, config.conv_stride, config.padding, s),
            None => Layer::Conv2d {
                weight: Tensor::zeros(&[c, cin, k, k]),
                bias: Tensor::zeros(&[c]),
                stride: config.conv_stride,
                pad: config.padding,
            },
        });
        layers.push(Layer::Relu);
        layers.push(Layer::MaxPool2d {
            size: config.pool_size,
            stride: config.pool_stride,
        });
        cin = c;
    }
    layers.push(Layer::Flatten);
    let mut fin = config.flatten_size()?;
    let blocks = config.conv_channels.len();
    for (j, &o) in config.fc_sizes.iter().enumerate() {
        if j > 0 {
            layers.push(Layer::Relu);
        }
        layers.push(match layer_seed(blocks + j) {
            Some(s) => Layer::linear_he(fin, o, s),
            None => Layer::Linear {
                weight: Tensor::zeros(&[o, fin]),
                bias: Tensor::zeros(&[o]),
            },
        });
        fin = o;
    }
    let model = Model {
        config: config.clone(),
        net: Sequential::new(layers),
    };
    let expected = config.parameter_count()?;
    if model.net.parameter_count() != expected {
        return Err(Error::shape(
            "build_model",
            format!("{} parameters, expected {expected}", model.net.parameter_count()),
        ));
    }
    Ok(model)
}

impl Model {
    /// `conv1.weight`, `conv1.bias`, …, `fc1.weight`, … in parameter order.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 1..=self.config.conv_channels.len() {
            names.push(format!("conv{i}.weight"));
            names.push(format!("conv{i}.bias"));
        }
        for j in 1..=self.config.fc_sizes.len() {
            names.push(format!("fc{j}.weight"));
            names.push(format!("fc{j}.bias"));
        }
        names
    }

    pub fn input_shape(&self) -> [usize; 3] {
        let c = &self.config;
        [c.input_channels, c.input_height, c.input_width]
    }

    /// Wrap an image as a `[1, H, W]` tensor after checking its size.
    pub fn image_tensor(&self, img: &SpectrogramImage) -> Result<Tensor> {
        self.pixels_tensor(img.height, img.width, &img.pixels)
    }

    pub fn pixels_tensor(&self, height: usize, width: usize, pixels: &[f32]) -> Result<Tensor> {
        let [c, h, w] = self.input_shape();
        if c != 1 || height != h || width != w {
            return Err(Error::shape(
                "predict",
                format!("image {height}x{width}, model expects {c}x{h}x{w}"),
            ));
        }
        Tensor::new(vec![1, h, w], pixels.to_vec())
    }

    fn check_batch(&self, x: &Tensor) -> Result<()> {
        let want = self.input_shape();
        if x.ndim() != 4 || x.shape()[1..] != want {
            return Err(Error::shape(
                "forward",
                format!("batch {:?}, model expects [N, {}, {}, {}]", x.shape(), want[0], want[1], want[2]),
            ));
        }
        Ok(())
    }

    /// Logits `[N, classes]` for a batch `[N, C, H, W]`.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.check_batch(x)?;
        self.net.forward(x)
    }

    /// Index of the layer whose output is the pre-classifier feature vector.
    pub fn penultimate_layer(&self) -> usize {
        self.net.layers.len() - 2
    }

    /// Pre-classifier features `[N, F]`.
    pub fn penultimate(&self, x: &Tensor) -> Result<Tensor> {
        self.check_batch(x)?;
        let mut g = Graph::new();
        let input = g.leaf(x.clone(), false);
        let trace = self.net.trace(&mut g, input, false)?;
        Ok(g.into_value(trace.outputs[self.penultimate_layer()]))
    }

    /// Forward one `[C, H, W]` input and keep the intermediate maps.
    pub fn predict_tensor(&self, x: &Tensor) -> Result<Prediction> {
        let [c, h, w] = self.input_shape();
        if x.shape() != [c, h, w] {
            return Err(Error::shape(
                "predict",
                format!("input {:?}, model expects {c}x{h}x{w}", x.shape()),
            ));
        }
        let batch = x.clone().reshape(&[1, c, h, w])?;
        let mut g = Graph::new();
        let input = g.leaf(batch, false);
        let trace = self.net.trace(&mut g, input, false)?;
        let logits = g.value(trace.logits()).data().to_vec();
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits".into()));
        }
        let conv_maps = self
            .net
            .layers
            .iter()
            .enumerate()
            .filter(|(i, l)| {
                matches!(l, Layer::Relu)
                    && matches!(self.net.layers.get(i.wrapping_sub(1)), Some(Layer::Conv2d { .. }))
            })
            .map(|(i, _)| g.value(trace.outputs[i]).slice0(0))
            .collect();
        let penultimate = g.value(trace.outputs[self.penultimate_layer()]).slice0(0);
        Ok(Prediction {
            probabilities: softmax(&logits),
            logits,
            cache: ActivationCache {
                conv_maps,
                penultimate,
            },
        })
    }

    pub fn predict(&self, img: &SpectrogramImage) -> Result<Prediction> {
        self.predict_tensor(&self.image_tensor(img)?)
    }
}
