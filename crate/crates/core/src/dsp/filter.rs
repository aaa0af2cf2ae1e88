//! Butterworth band-pass as two cascaded biquads, applied forward and
//! backward for zero phase.
//!
//! Design: second-order analog Butterworth low-pass prototype, low-pass to
//! band-pass transform around the prewarped band edges, then the bilinear
//! transform. Each section is scaled to unit gain at the digital center
//! frequency.

use rustfft::num_complex::Complex64;

use super::Waveform;
use crate::error::{Error, Result};

/// Direct-form II transposed biquad, `a[0] == 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = self.a[0] + self.a[1] * z1 + self.a[2] * z2;
        num / den
    }

    /// Steady-state filter state for a constant unit input.
    fn unit_step_state(&self) -> [f64; 2] {
        let dc = (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2]);
        [dc - self.b[0], self.b[2] - self.a[2] * dc]
    }

    fn run(&self, x: &mut [f64], mut state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + state[0];
            state[0] = b1 * input - a1 * y + state[1];
            state[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bandpass {
    pub sections: [Biquad; 2],
    pub center_omega: f64,
}

impl Bandpass {
    pub fn design(lo_hz: f64, hi_hz: f64, sample_rate: f64) -> Result<Self> {
        if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < sample_rate / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "band-pass needs 0 < lo < hi < fs/2, got lo={lo_hz} hi={hi_hz} fs={sample_rate}"
            )));
        }
        let fs2 = 2.0 * sample_rate;
        let w_lo = fs2 * (std::f64::consts::PI * lo_hz / sample_rate).tan();
        let w_hi = fs2 * (std::f64::consts::PI * hi_hz / sample_rate).tan();
        let w0 = (w_lo * w_hi).sqrt();
        let bw = w_hi - w_lo;
        let proto = Complex64::from_polar(1.0, 0.75 * std::f64::consts::PI);
        let disc = (proto * proto * bw * bw - 4.0 * w0 * w0).sqrt();
        let poles = [(proto * bw + disc) / 2.0, (proto * bw - disc) / 2.0];
        let center_omega = 2.0 * (w0 / fs2).atan();
        let sections = poles.map(|s| {
            let z = (1.0 + s / fs2) / (1.0 - s / fs2);
            let mut q = Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -2.0 * z.re, z.norm_sqr()],
            };
            let g = q.response(center_omega).norm();
            q.b = q.b.map(|v| v / g);
            q
        });
        Ok(Bandpass {
            sections,
            center_omega,
        })
    }

    /// Magnitude of one forward pass at `omega` (radians/sample).
    pub fn magnitude(&self, omega: f64) -> f64 {
        self.sections.iter().map(|s| s.response(omega).norm()).product()
    }

    fn forward(&self, x: &mut [f64]) {
        let x0 = x[0];
        for s in &self.sections {
            let [z0, z1] = s.unit_step_state();
            s.run(x, [z0 * x0, z1 * x0]);
        }
    }

    /// Zero-phase filtering with odd-extension padding at both ends.
    pub fn filtfilt(&self, input: &[f32]) -> Vec<f32> {
        let n = input.len();
        if n < 2 {
            return input.to_vec();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let first = input[0] as f64;
        let last = input[n - 1] as f64;
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - input[i] as f64));
        ext.extend(input.iter().map(|&v| v as f64));
        ext.extend((1..=pad).map(|i| 2.0 * last - input[n - 1 - i] as f64));
        self.forward(&mut ext);
        ext.reverse();
        self.forward(&mut ext);
        ext.reverse();
        ext[pad..pad + n].iter().map(|&v| v as f32).collect()
    }
}

/// Zero-phase Butterworth band-pass between `lo_hz` and `hi_hz`.
pub fn bandpass(w: &Waveform, lo_hz: f64, hi_hz: f64) -> Result<Waveform> {
    let design = Bandpass::design(lo_hz, hi_hz, w.sample_rate as f64)?;
    let samples = design.filtfilt(&w.samples);
    Waveform::new(samples, w.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_bands_are_rejected() {
        assert!(Bandpass::design(9000.0, 1500.0, 48_000.0).is_err());
        assert!(Bandpass::design(1500.0, 30_000.0, 48_000.0).is_err());
        assert!(Bandpass::design(0.0, 9000.0, 48_000.0).is_err());
    }

    #[test]
    fn unit_gain_at_center() {
        let bp = Bandpass::design(1500.0, 9000.0, 48_000.0).unwrap();
        assert!((bp.magnitude(bp.center_omega) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_in_zero_out() {
        let w = Waveform::new(vec![0.0; 1000], 48_000).unwrap();
        let out = bandpass(&w, 1500.0, 9000.0).unwrap();
        assert!(out.samples.iter().all(|&v| v == 0.0));
    }
}
