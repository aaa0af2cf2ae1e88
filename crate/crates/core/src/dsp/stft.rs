use rustfft::num_complex::Complex32;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

pub const DB_FLOOR: f32 = -120.0;
const MAG_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftParams {
    pub window_len: usize,
    pub overlap: f64,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams {
            window_len: 512,
            overlap: 0.95,
        }
    }
}

impl StftParams {
    /// `round(window_len * (1 - overlap))`, at least one sample.
    pub fn hop(&self) -> usize {
        ((self.window_len as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }

    pub fn frame_count(&self, samples: usize) -> usize {
        if samples < self.window_len {
            0
        } else {
            (samples - self.window_len) / self.hop() + 1
        }
    }
}

/// Magnitudes in dB relative to the grid maximum, bin-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StftFrames {
    /// `magnitude_db[bin * n_frames + frame]`
    pub magnitude_db: Vec<f32>,
    pub n_bins: usize,
    pub n_frames: usize,
    pub bin_hz: f64,
    pub hop_samples: usize,
    pub window_len: usize,
}

impl StftFrames {
    pub fn at(&self, bin: usize, frame: usize) -> f32 {
        self.magnitude_db[bin * self.n_frames + frame]
    }

    pub fn bin_row(&self, bin: usize) -> &[f32] {
        &self.magnitude_db[bin * self.n_frames..(bin + 1) * self.n_frames]
    }
}

/// Symmetric Hann window.
pub fn hann(len: usize) -> Vec<f32> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64;
            (0.5 - 0.5 * x.cos()) as f32
        })
        .collect()
}

/// Raw magnitude spectra, frame-major: `out[frame][bin]`.
pub fn magnitude_frames(w: &Waveform, params: &StftParams) -> Result<Vec<Vec<f32>>> {
    let n = params.window_len;
    if n < 2 {
        return Err(Error::InvalidArgument("STFT window must be >= 2 samples".into()));
    }
    if w.samples.len() < n {
        return Err(Error::InvalidArgument(format!(
            "signal of {} samples is shorter than one {n}-sample window",
            w.samples.len()
        )));
    }
    let hop = params.hop();
    let frames = params.frame_count(w.samples.len());
    let bins = n / 2 + 1;
    let window = hann(n);
    let fft = FftPlanner::<f32>::new().plan_fft_forward(n);
    let mut buf = vec![Complex32::new(0.0, 0.0); n];
    let mut scratch = vec![Complex32::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Vec::with_capacity(frames);
    for f in 0..frames {
        let seg = &w.samples[f * hop..f * hop + n];
        for ((b, &s), &h) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex32::new(s * h, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.push(buf[..bins].iter().map(|c| c.norm()).collect());
    }
    Ok(out)
}

/// Hann-windowed STFT in dB relative to the loudest cell, floored at -120 dB.
/// An all-zero signal yields a grid entirely at the floor.
pub fn stft(w: &Waveform, params: &StftParams) -> Result<StftFrames> {
    let mags = magnitude_frames(w, params)?;
    let n_frames = mags.len();
    let n_bins = params.window_len / 2 + 1;
    let max = mags
        .iter()
        .flat_map(|f| f.iter())
        .fold(0.0f64, |m, &v| m.max(v as f64));
    let mut db = vec![DB_FLOOR; n_bins * n_frames];
    if max > MAG_GUARD {
        for (f, frame) in mags.iter().enumerate() {
            for (b, &m) in frame.iter().enumerate() {
                let v = 20.0 * ((m as f64).max(MAG_GUARD) / max).log10();
                db[b * n_frames + f] = (v as f32).max(DB_FLOOR);
            }
        }
    }
    Ok(StftFrames {
        magnitude_db: db,
        n_bins,
        n_frames,
        bin_hz: w.sample_rate as f64 / params.window_len as f64,
        hop_samples: params.hop(),
        window_len: params.window_len,
    })
}
