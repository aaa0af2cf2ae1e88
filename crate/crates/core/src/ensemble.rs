//! Fusion of Grad-CAM and DeepLIFT maps and threshold-coverage curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::png_io;
use crate::error::{Error, Result};
use crate::xai::{normalize_minmax, Method, SaliencyMap, NORM_EPS};

pub const THRESHOLDS: [f64; 6] = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Average,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub w1: f32,
    pub w2: f32,
    pub strategy: Strategy,
    /// Min-max normalize the fused map again.
    pub renormalize: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            w1: 0.5,
            w2: 0.5,
            strategy: Strategy::Max,
            renormalize: false,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fusion weights must be non-negative, got {} and {}",
                self.w1, self.w2
            )));
        }
        if self.strategy == Strategy::Average && (self.w1 + self.w2 - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "average fusion weights must sum to 1, got {}",
                self.w1 + self.w2
            )));
        }
        Ok(())
    }
}

fn same_dims(a: &SaliencyMap, b: &SaliencyMap) -> Result<()> {
    if (a.height, a.width) != (b.height, b.width) || a.values.len() != b.values.len() {
        return Err(Error::shape(
            "fuse",
            format!("{}x{} vs {}x{}", a.height, a.width, b.height, b.width),
        ));
    }
    Ok(())
}

/// `w1 * cam + w2 * ldf`, pixelwise, without re-normalization.
pub fn fuse_average(cam: &SaliencyMap, ldf: &SaliencyMap, w1: f32, w2: f32) -> Result<SaliencyMap> {
    same_dims(cam, ldf)?;
    if !(w1 >= 0.0 && w2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fusion weights must be non-negative, got {w1} and {w2}"
        )));
    }
    Ok(SaliencyMap {
        values: cam.values.iter().zip(&ldf.values).map(|(&a, &b)| w1 * a + w2 * b).collect(),
        method: Method::EnsembleAvg,
        ..cam.clone()
    })
}

/// Pixelwise maximum.
pub fn fuse_max(cam: &SaliencyMap, ldf: &SaliencyMap) -> Result<SaliencyMap> {
    same_dims(cam, ldf)?;
    Ok(SaliencyMap {
        values: cam.values.iter().zip(&ldf.values).map(|(&a, &b)| a.max(b)).collect(),
        method: Method::EnsembleMax,
        ..cam.clone()
    })
}

pub fn fuse(cam: &SaliencyMap, ldf: &SaliencyMap, cfg: &EnsembleConfig) -> Result<SaliencyMap> {
    cfg.validate()?;
    let mut out = match cfg.strategy {
        Strategy::Average => fuse_average(cam, ldf, cfg.w1, cfg.w2)?,
        Strategy::Max => fuse_max(cam, ldf)?,
    };
    if cfg.renormalize {
        out.values = normalize_minmax(&out.values, NORM_EPS)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub method: Method,
    pub thresholds: Vec<f64>,
    pub fraction_above: Vec<f64>,
}

/// Fraction of pixels strictly above each threshold. Thresholds are sorted
/// ascending first.
pub fn threshold_coverage(map: &SaliencyMap, thresholds: &[f64]) -> CoverageCurve {
    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);
    let n = map.values.len().max(1) as f64;
    let fraction_above = ts
        .iter()
        .map(|&t| map.values.iter().filter(|&&v| v as f64 > t).count() as f64 / n)
        .collect();
    CoverageCurve {
        method: map.method,
        thresholds: ts,
        fraction_above,
    }
}

/// A violation of `coverage(max) >= max(coverage(gradcam), coverage(deeplift))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sample: Option<String>,
    pub threshold: f64,
    pub max_fraction: f64,
    pub best_single: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub thresholds: Vec<f64>,
    pub per_sample: Vec<(String, Vec<CoverageCurve>)>,
    pub mean: Vec<CoverageCurve>,
    pub violations: Vec<Violation>,
}

fn check_identity(curves: &[CoverageCurve], sample: Option<&str>, out: &mut Vec<Violation>) {
    let get = |m: Method| curves.iter().find(|c| c.method == m);
    let (Some(mx), Some(cam), Some(ldf)) = (get(Method::EnsembleMax), get(Method::Gradcam), get(Method::Deeplift)) else {
        return;
    };
    for (i, &t) in mx.thresholds.iter().enumerate() {
        let best = cam.fraction_above[i].max(ldf.fraction_above[i]);
        if mx.fraction_above[i] < best {
            out.push(Violation {
                sample: sample.map(str::to_string),
                threshold: t,
                max_fraction: mx.fraction_above[i],
                best_single: best,
            });
        }
    }
}

/// Per-sample and mean coverage curves per method, plus a check of the
/// max-coverage identity on every sample.
pub fn coverage_report(samples: &[(String, Vec<SaliencyMap>)], thresholds: &[f64]) -> Result<CoverageReport> {
    let Some((_, first)) = samples.first() else {
        return Err(Error::Data("coverage report needs at least one sample".into()));
    };
    let dims = first
        .first()
        .map(|m| (m.height, m.width))
        .ok_or_else(|| Error::Data("sample without saliency maps".into()))?;
    let methods: Vec<Method> = first.iter().map(|m| m.method).collect();
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut violations = Vec::new();
    for (id, maps) in samples {
        let these: Vec<Method> = maps.iter().map(|m| m.method).collect();
        if these != methods {
            return Err(Error::Data(format!("{id}: methods {these:?} differ from {methods:?}")));
        }
        if let Some(m) = maps.iter().find(|m| (m.height, m.width) != dims) {
            return Err(Error::Data(format!(
                "{id}: {} map is {}x{}, expected {}x{}",
                m.method, m.height, m.width, dims.0, dims.1
            )));
        }
        let curves: Vec<CoverageCurve> = maps.iter().map(|m| threshold_coverage(m, thresholds)).collect();
        for (i, c) in curves.iter().enumerate() {
            let acc = sums.entry(i).or_insert_with(|| vec![0.0; c.thresholds.len()]);
            acc.iter_mut().zip(&c.fraction_above).for_each(|(a, f)| *a += f);
        }
        check_identity(&curves, Some(id), &mut violations);
        per_sample.push((id.clone(), curves));
    }
    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mean: Vec<CoverageCurve> = methods
        .iter()
        .enumerate()
        .map(|(i, &method)| CoverageCurve {
            method,
            thresholds: ts.clone(),
            fraction_above: sums[&i].iter().map(|s| s / n).collect(),
        })
        .collect();
    check_identity(&mean, None, &mut violations);
    Ok(CoverageReport {
        thresholds: ts,
        per_sample,
        mean,
        violations,
    })
}

impl CoverageReport {
    pub const CSV_HEADER: &'static str = "method,threshold,fraction";

    /// Mean curves, one row per (method, threshold).
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for c in &self.mean {
            for (t, f) in c.thresholds.iter().zip(&c.fraction_above) {
                let _ = writeln!(s, "{},{t:.1},{f:.6}", c.method);
            }
        }
        s
    }

    pub fn per_sample_csv(&self) -> String {
        let mut s = String::from("sample_id,method,threshold,fraction\n");
        for (id, curves) in &self.per_sample {
            for c in curves {
                for (t, f) in c.thresholds.iter().zip(&c.fraction_above) {
                    let _ = writeln!(s, "{id},{},{t:.1},{f:.6}", c.method);
                }
            }
        }
        s
    }

    /// Threshold on x, percentage on y, one coloured polyline per method.
    pub fn write_plot(&self, path: &Path) -> Result<()> {
        let (w, h) = (480usize, 320usize);
        let (left, right, top, bottom) = (40usize, 460usize, 20usize, 290usize);
        let mut px = vec![[1.0f32; 3]; w * h];
        let put = |x: i64, y: i64, c: [f32; 3], px: &mut Vec<[f32; 3]>| {
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                px[y as usize * w + x as usize] = c;
            }
        };
        let black = [0.0; 3];
        for x in left..=right {
            put(x as i64, bottom as i64, black, &mut px);
        }
        for y in top..=bottom {
            put(left as i64, y as i64, black, &mut px);
        }
        let (t0, t1) = match (self.thresholds.first(), self.thresholds.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            (Some(&a), _) => (a - 0.5, a + 0.5),
            _ => (0.0, 1.0),
        };
        let to_px = |t: f64, f: f64| -> (i64, i64) {
            let x = left as f64 + (t - t0) / (t1 - t0) * (right - left) as f64;
            let y = bottom as f64 - f.clamp(0.0, 1.0) * (bottom - top) as f64;
            (x.round() as i64, y.round() as i64)
        };
        for &t in &self.thresholds {
            let (x, _) = to_px(t, 0.0);
            for d in 0..5 {
                put(x, bottom as i64 + d, black, &mut px);
            }
        }
        const COLOURS: [[f32; 3]; 6] = [
            [0.12, 0.47, 0.71],
            [1.0, 0.5, 0.05],
            [0.17, 0.63, 0.17],
            [0.84, 0.15, 0.16],
            [0.58, 0.4, 0.74],
            [0.55, 0.34, 0.29],
        ];
        for (ci, c) in self.mean.iter().enumerate() {
            let colour = COLOURS[ci % COLOURS.len()];
            let pts: Vec<(i64, i64)> = c.thresholds.iter().zip(&c.fraction_above).map(|(&t, &f)| to_px(t, f)).collect();
            for seg in pts.windows(2) {
                let ((x0, y0), (x1, y1)) = (seg[0], seg[1]);
                let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
                for s in 0..=steps {
                    let x = x0 + (x1 - x0) * s / steps;
                    let y = y0 + (y1 - y0) * s / steps;
                    for (dx, dy) in [(0, 0), (0, 1), (1, 0)] {
                        put(x + dx, y + dy, colour, &mut px);
                    }
                }
            }
            for &(x, y) in &pts {
                for dx in -2..=2 {
                    for dy in -2..=2 {
                        put(x + dx, y + dy, colour, &mut px);
                    }
                }
            }
        }
        png_io::write_rgb(path, w, h, &px)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(values: Vec<f32>, method: Method) -> SaliencyMap {
        SaliencyMap {
            height: 1,
            width: values.len(),
            values,
            method,
            target_class: 0,
        }
    }

    #[test]
    fn fusion_examples() {
        let a = map(vec![0.3], Method::Gradcam);
        let b = map(vec![0.7], Method::Deeplift);
        assert_eq!(fuse_average(&a, &b, 0.5, 0.5).unwrap().values, vec![0.5]);
        assert_eq!(fuse_max(&a, &b).unwrap().values, vec![0.7]);
        assert_eq!(fuse_average(&a, &b, 1.0, 0.0).unwrap().values, a.values);
        assert!(fuse_average(&a, &b, -0.1, 1.1).is_err());
        assert!(fuse_max(&a, &map(vec![0.1, 0.2], Method::Deeplift)).is_err());
    }

    #[test]
    fn coverage_examples() {
        let m = map(vec![0.0, 0.5, 1.0], Method::Gradcam);
        let c = threshold_coverage(&m, &[0.4, 1.0]);
        assert_eq!(c.fraction_above, vec![2.0 / 3.0, 0.0]);
        let unsorted = threshold_coverage(&m, &[0.9, 0.4]);
        assert_eq!(unsorted.thresholds, vec![0.4, 0.9]);
        let zero = threshold_coverage(&map(vec![0.0; 4], Method::Gradcam), &THRESHOLDS);
        assert!(zero.fraction_above.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn average_strategy_needs_unit_sum() {
        let cfg = EnsembleConfig {
            w1: 0.5,
            w2: 0.6,
            strategy: Strategy::Average,
            renormalize: false,
        };
        assert!(cfg.validate().is_err());
        assert!(EnsembleConfig { strategy: Strategy::Max, ..cfg }.validate().is_ok());
    }
}
