//! Audio to spectrogram images: WAV decoding, clip segmentation, band-pass,
//! STFT, dB rasterization and PNG I/O.

mod filter;
pub mod png_io;
mod render;
mod stft;
mod wav;

pub use filter::{bandpass, Bandpass, Biquad};
pub use render::{
    render_spectrogram, RenderParams, SpectrogramImage, TimeAggregation, CANONICAL_HEIGHT,
    CANONICAL_WIDTH,
};
pub use stft::{hann, magnitude_frames, stft, StftFrames, StftParams, DB_FLOOR};
pub use wav::{decode_wav, encode_wav_pcm16};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Background;

pub const CANONICAL_SAMPLE_RATE: u32 = 48_000;

/// Mono audio with samples clipped to [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(mut samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty waveform".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("waveform samples".into()));
        }
        for s in &mut samples {
            *s = s.clamp(-1.0, 1.0);
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Consecutive non-overlapping clips; a trailing partial clip is dropped.
pub fn segment_clips(w: &Waveform, clip_seconds: f64) -> Vec<Waveform> {
    let len = (clip_seconds * w.sample_rate as f64).round() as usize;
    if len == 0 {
        return Vec::new();
    }
    w.samples
        .chunks_exact(len)
        .map(|c| Waveform {
            samples: c.to_vec(),
            sample_rate: w.sample_rate,
        })
        .collect()
}

/// Every knob of the audio-to-image chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspParams {
    pub clip_seconds: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub stft: StftParams,
    pub render: RenderParams,
}

impl Default for DspParams {
    fn default() -> Self {
        DspParams {
            clip_seconds: 4.0,
            band_lo_hz: 1500.0,
            band_hi_hz: 9000.0,
            stft: StftParams::default(),
            render: RenderParams::default(),
        }
    }
}

impl DspParams {
    pub fn with_scale(divisor: usize) -> Result<Self> {
        Ok(DspParams {
            render: RenderParams::scaled(divisor)?,
            ..Self::default()
        })
    }
}

/// Band-pass, STFT and render one clip under each requested background.
/// The STFT is computed once and shared between renders.
pub fn clip_to_images(
    clip: &Waveform,
    params: &DspParams,
    backgrounds: &[Background],
) -> Result<Vec<SpectrogramImage>> {
    if clip.sample_rate != CANONICAL_SAMPLE_RATE {
        return Err(Error::Data(format!(
            "sample rate {} Hz not supported; resample to {CANONICAL_SAMPLE_RATE} Hz",
            clip.sample_rate
        )));
    }
    let filtered = bandpass(clip, params.band_lo_hz, params.band_hi_hz)?;
    let frames = stft(&filtered, &params.stft)?;
    backgrounds
        .iter()
        .map(|&bg| {
            let mut img = render_spectrogram(&frames, bg, &params.render)?;
            img.duration_s = clip.duration_s();
            Ok(img)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(seconds: f64) -> Waveform {
        let n = (seconds * 48_000.0).round() as usize;
        Waveform::new(vec![0.1; n], 48_000).unwrap()
    }

    #[test]
    fn segmentation_counts() {
        assert_eq!(segment_clips(&tone(12.0), 4.0).len(), 3);
        assert_eq!(segment_clips(&tone(12.0), 4.0)[2].samples.len(), 192_000);
        assert_eq!(segment_clips(&tone(4.0), 4.0).len(), 1);
        assert_eq!(segment_clips(&tone(3.9), 4.0).len(), 0);
    }

    #[test]
    fn ingest_clips_and_rejects_empty() {
        let w = Waveform::new(vec![2.0, -3.0, 0.5], 48_000).unwrap();
        assert_eq!(w.samples, vec![1.0, -1.0, 0.5]);
        assert!(Waveform::new(vec![], 48_000).is_err());
        assert!(Waveform::new(vec![f32::NAN], 48_000).is_err());
    }

    #[test]
    fn other_sample_rates_are_rejected() {
        let w = Waveform::new(vec![0.0; 44_100], 44_100).unwrap();
        assert!(clip_to_images(&w, &DspParams::default(), &[Background::Black]).is_err());
    }
}
