//! Minimal RIFF/WAVE reader (PCM16, PCM24, float32) and PCM16 writer.

use super::Waveform;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(Error::Wav(format!("fmt chunk too short ({} bytes)", body.len())));
    }
    let mut format = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if format == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(Error::Wav("extensible fmt chunk missing subformat".into()));
        }
        format = u16_at(body, 24);
    }
    if channels == 0 {
        return Err(Error::Wav("zero channels".into()));
    }
    if sample_rate == 0 {
        return Err(Error::Wav("zero sample rate".into()));
    }
    Ok(FmtChunk {
        format,
        channels,
        sample_rate,
        bits,
    })
}

/// Decode a WAV file, keeping the first channel.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Wav("missing RIFF/WAVE header".into()));
    }
    let mut fmt = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let len = u32_at(bytes, at + 4) as usize;
        let start = at + 8;
        let end = start
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Wav(format!("chunk {:?} overruns file", String::from_utf8_lossy(id))))?;
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        at = end + (len & 1);
    }
    let fmt = fmt.ok_or_else(|| Error::Wav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Wav("no data chunk".into()))?;

    let width = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        (FORMAT_FLOAT, 32) => 4,
        (f, b) => {
            return Err(Error::Wav(format!(
                "unsupported codec: format tag {f}, {b} bits per sample"
            )))
        }
    };
    let frame = width * fmt.channels as usize;
    if data.len() % frame != 0 {
        return Err(Error::Wav(format!(
            "data length {} is not a multiple of the {frame}-byte frame",
            data.len()
        )));
    }
    let samples: Vec<f32> = data
        .chunks_exact(frame)
        .map(|f| match width {
            2 => i16::from_le_bytes([f[0], f[1]]) as f32 / 32768.0,
            3 => {
                let v = i32::from_le_bytes([0, f[0], f[1], f[2]]) >> 8;
                (v as f64 / 8_388_608.0) as f32
            }
            _ => f32::from_le_bytes([f[0], f[1], f[2], f[3]]),
        })
        .collect();
    Waveform::new(samples, fmt.sample_rate)
}

/// Encode mono 16-bit PCM. Samples are clipped to [-1, 1] and rounded.
pub fn encode_wav_pcm16(w: &Waveform) -> Vec<u8> {
    let data_len = w.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &w.samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
