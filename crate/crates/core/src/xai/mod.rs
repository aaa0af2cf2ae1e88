//! Attribution engines over a [`Sequential`](crate::model::Sequential)
//! network: Grad-CAM, DeepLIFT, LIME over SLIC superpixels, and
//! expected-gradients SHAP. Each produces a min-max normalized
//! [`SaliencyMap`] at input resolution.

mod deeplift;
mod gradcam;
mod lime;
mod shap;
mod slic;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use deeplift::{deeplift, DeepLift, DELTA_EPS};
pub use gradcam::{gradcam, gradcam_raw, GradCam};
pub use lime::{lime_explain, LimeConfig, LimeExplanation, ProbabilityModel};
pub use shap::{shap_explain, ShapConfig, ShapExplanation};
pub use slic::{slic_segment, SegmentMask, SlicConfig};

use crate::dsp::png_io;
use crate::error::{Error, Result};
use crate::model::{archive, Sequential};
use crate::tensor::Tensor;
use crate::types::Background;

pub const NORM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gradcam,
    Deeplift,
    Lime,
    Shap,
    EnsembleAvg,
    EnsembleMax,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Gradcam,
        Method::Deeplift,
        Method::Lime,
        Method::Shap,
        Method::EnsembleAvg,
        Method::EnsembleMax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gradcam => "gradcam",
            Method::Deeplift => "deeplift",
            Method::Lime => "lime",
            Method::Shap => "shap",
            Method::EnsembleAvg => "ensemble_avg",
            Method::EnsembleMax => "ensemble_max",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    /// Accepts `ensemble-avg` as well as `ensemble_avg`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown saliency method {s:?}")))
    }
}

/// Row-major relevance grid in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
    pub method: Method,
    pub target_class: usize,
}

impl SaliencyMap {
    /// Normalize `raw` and wrap it.
    pub fn from_raw(height: usize, width: usize, raw: &[f32], method: Method, target_class: usize) -> Result<Self> {
        if raw.len() != height * width {
            return Err(Error::shape(
                "saliency",
                format!("{} values for a {height}x{width} map", raw.len()),
            ));
        }
        Ok(SaliencyMap {
            height,
            width,
            values: normalize_minmax(raw, NORM_EPS)?,
            method,
            target_class,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.height, self.width], self.values.clone()).expect("map shape")
    }
}

/// `(H - min) / (max - min + eps)`, computed in f64. A constant map becomes
/// all zeros.
pub fn normalize_minmax(h: &[f32], eps: f64) -> Result<Vec<f32>> {
    if h.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("saliency map".into()));
    }
    if h.iter().any(|v| v.is_infinite()) {
        return Err(Error::NonFinite("saliency map".into()));
    }
    if h.is_empty() {
        return Ok(Vec::new());
    }
    let (lo, hi) = h
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v as f64), hi.max(v as f64)));
    let denom = hi - lo + eps;
    Ok(h.iter().map(|&v| ((v as f64 - lo) / denom) as f32).collect())
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn upsample_bilinear(src: &[f32], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (s.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let (ys, xs) = (axis(h, out_h), axis(w, out_w));
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let v = |y: usize, x: usize| src[y * w + x] as f64;
            let top = v(y0, x0) * (1.0 - fx) + v(y0, x1) * fx;
            let bot = v(y1, x0) * (1.0 - fx) + v(y1, x1) * fx;
            out.push((top * (1.0 - fy) + bot * fy) as f32);
        }
    }
    out
}

/// Sum a `[C, H, W]` tensor over channels.
pub(crate) fn channel_sum(t: &Tensor) -> (usize, usize, Vec<f32>) {
    let s = t.shape();
    let (c, h, w) = (s[0], s[1], s[2]);
    let mut out = vec![0.0f64; h * w];
    for plane in t.data().chunks(h * w).take(c) {
        for (o, &v) in out.iter_mut().zip(plane) {
            *o += v as f64;
        }
    }
    (h, w, out.into_iter().map(|v| v as f32).collect())
}

pub(crate) fn check_input(net: &Sequential, x: &Tensor, class: usize) -> Result<usize> {
    if x.ndim() != 3 {
        return Err(Error::shape("explain", format!("expected [C, H, W] input, got {:?}", x.shape())));
    }
    let classes = net.output_classes()?;
    if class >= classes {
        return Err(Error::InvalidArgument(format!(
            "target class {class} out of range for {classes} classes"
        )));
    }
    Ok(classes)
}

pub(crate) fn as_batch(x: &Tensor) -> Result<Tensor> {
    let mut shape = vec![1];
    shape.extend_from_slice(x.shape());
    x.clone().reshape(&shape)
}

/// Constant "no signal" image of the given shape.
pub fn background_reference(shape: &[usize], background: Background) -> Tensor {
    Tensor::full(shape, background.intensity())
}

const JET: [(f32, [f32; 3]); 6] = [
    (0.0, [0.0, 0.0, 0.5]),
    (0.125, [0.0, 0.0, 1.0]),
    (0.375, [0.0, 1.0, 1.0]),
    (0.625, [1.0, 1.0, 0.0]),
    (0.875, [1.0, 0.0, 0.0]),
    (1.0, [0.5, 0.0, 0.0]),
];

/// Piecewise-linear jet colormap on `[0, 1]`.
pub fn jet(v: f32) -> [f32; 3] {
    let v = v.clamp(0.0, 1.0);
    for pair in JET.windows(2) {
        let ((a, ca), (b, cb)) = (pair[0], pair[1]);
        if v <= b {
            let t = (v - a) / (b - a);
            return [0, 1, 2].map(|i| ca[i] + (cb[i] - ca[i]) * t);
        }
    }
    JET[5].1
}

/// `alpha * jet(map) + (1 - alpha) * gray`, per channel.
pub fn overlay(gray: &[f32], map: &SaliencyMap, alpha: f32) -> Result<Vec<[f32; 3]>> {
    if gray.len() != map.len() {
        return Err(Error::shape(
            "overlay",
            format!("image has {} pixels, map has {}", gray.len(), map.len()),
        ));
    }
    Ok(gray
        .iter()
        .zip(&map.values)
        .map(|(&g, &m)| jet(m).map(|c| alpha * c + (1.0 - alpha) * g))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencySidecar {
    pub sample_id: String,
    pub method: Method,
    pub target_class: usize,
    pub height: usize,
    pub width: usize,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
}

/// Write `<stem>.bin` (tensor `saliency`), `<stem>.png` (overlay) and
/// `<stem>.json` (sidecar) under `dir`.
pub fn write_saliency(
    dir: &Path,
    stem: &str,
    gray: &[f32],
    map: &SaliencyMap,
    sidecar: &SaliencySidecar,
    alpha: f32,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = serde_json::to_value(sidecar)?;
    let bin = dir.join(format!("{stem}.bin"));
    let bytes = archive::encode(&[("saliency".to_string(), &map.to_tensor())], &meta)?;
    std::fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    png_io::write_rgb(&dir.join(format!("{stem}.png")), map.width, map.height, &overlay(gray, map, alpha)?)?;
    let json = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(sidecar)?;
    text.push('\n');
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))
}

/// Read back the map stored by [`write_saliency`].
pub fn read_saliency(path: &Path) -> Result<SaliencyMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (tensors, meta) = archive::decode(&bytes)?;
    let sidecar: SaliencySidecar = serde_json::from_value(meta)?;
    let (_, t) = tensors
        .into_iter()
        .find(|(n, _)| n == "saliency")
        .ok_or_else(|| Error::Data(format!("{}: no saliency tensor", path.display())))?;
    if t.shape() != [sidecar.height, sidecar.width] {
        return Err(Error::Data(format!("{}: map shape {:?} disagrees with sidecar", path.display(), t.shape())));
    }
    Ok(SaliencyMap {
        height: sidecar.height,
        width: sidecar.width,
        values: t.into_data(),
        method: sidecar.method,
        target_class: sidecar.target_class,
    })
}
