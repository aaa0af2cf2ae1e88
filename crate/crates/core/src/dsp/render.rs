//! Rasterize dB frames into fixed-size intensity images.

use serde::{Deserialize, Serialize};

use super::stft::StftFrames;
use crate::error::{Error, Result};
use crate::types::{Background, SongClass};

pub const CANONICAL_HEIGHT: usize = 480;
pub const CANONICAL_WIDTH: usize = 960;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeAggregation {
    Max,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderParams {
    pub height: usize,
    pub width: usize,
    /// Clip range in dB, mapped linearly to [0, 1].
    pub db_range: (f32, f32),
    /// Top of the displayed band; the bottom is 0 Hz.
    pub freq_max_hz: f64,
    pub time_aggregation: TimeAggregation,
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams {
            height: CANONICAL_HEIGHT,
            width: CANONICAL_WIDTH,
            db_range: (-40.0, 5.0),
            freq_max_hz: 12_000.0,
            time_aggregation: TimeAggregation::Max,
        }
    }
}

impl RenderParams {
    /// Canonical geometry divided by `divisor` (1, 2 or 4).
    pub fn scaled(divisor: usize) -> Result<Self> {
        if ![1, 2, 4].contains(&divisor) {
            return Err(Error::InvalidArgument(format!(
                "image scale divisor must be 1, 2 or 4, got {divisor}"
            )));
        }
        Ok(RenderParams {
            height: CANONICAL_HEIGHT / divisor,
            width: CANONICAL_WIDTH / divisor,
            ..Self::default()
        })
    }

    /// dB value to black-background intensity.
    pub fn intensity(&self, db: f32) -> f32 {
        let (lo, hi) = self.db_range;
        ((db.clamp(lo, hi) - lo) as f64 / (hi - lo) as f64) as f32
    }
}

/// Row-major intensity grid; row 0 is the highest frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrogramImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
    pub background: Background,
    pub freq_range_hz: (f64, f64),
    pub duration_s: f64,
    pub label: Option<SongClass>,
    pub cluster: Option<u32>,
}

impl SpectrogramImage {
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    /// The same image with intensities inverted and the background flipped.
    pub fn inverted(&self) -> SpectrogramImage {
        SpectrogramImage {
            pixels: self.pixels.iter().map(|&v| 1.0 - v).collect(),
            background: match self.background {
                Background::Black => Background::White,
                Background::White => Background::Black,
            },
            ..self.clone()
        }
    }
}

/// Aggregate frames into columns, resample bins 0..=top into rows (low
/// frequency at the bottom), clip to the dB range and map to intensity.
pub fn render_spectrogram(
    frames: &StftFrames,
    background: Background,
    params: &RenderParams,
) -> Result<SpectrogramImage> {
    let (h, w) = (params.height, params.width);
    if h < 2 || w < 1 {
        return Err(Error::InvalidArgument(format!("render target {h}x{w} too small")));
    }
    if params.db_range.0 >= params.db_range.1 {
        return Err(Error::InvalidArgument("empty dB range".into()));
    }
    let top_bin = ((params.freq_max_hz / frames.bin_hz).round() as usize).min(frames.n_bins - 1);
    let nf = frames.n_frames;

    // columns[bin][col]
    let mut columns = vec![0.0f32; (top_bin + 1) * w];
    for bin in 0..=top_bin {
        let row = frames.bin_row(bin);
        for c in 0..w {
            let start = c * nf / w;
            let end = ((c + 1) * nf / w).max(start + 1).min(nf);
            let cells = &row[start..end];
            columns[bin * w + c] = match params.time_aggregation {
                TimeAggregation::Max => cells.iter().cloned().fold(f32::NEG_INFINITY, f32::max),
                TimeAggregation::Mean => {
                    (cells.iter().map(|&v| v as f64).sum::<f64>() / cells.len() as f64) as f32
                }
            };
        }
    }

    let mut pixels = vec![0.0f32; h * w];
    for r in 0..h {
        let pos = (h - 1 - r) as f64 * top_bin as f64 / (h - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(top_bin);
        let frac = (pos - lo as f64) as f32;
        for c in 0..w {
            let a = columns[lo * w + c];
            let b = columns[hi * w + c];
            let db = if frac == 0.0 { a } else { a + (b - a) * frac };
            let v = params.intensity(db);
            pixels[r * w + c] = match background {
                Background::Black => v,
                Background::White => 1.0 - v,
            };
        }
    }
    let duration_s = ((nf - 1) * frames.hop_samples + frames.window_len) as f64
        / (frames.bin_hz * frames.window_len as f64);
    Ok(SpectrogramImage {
        height: h,
        width: w,
        pixels,
        background,
        freq_range_hz: (0.0, top_bin as f64 * frames.bin_hz),
        duration_s,
        label: None,
        cluster: None,
    })
}
