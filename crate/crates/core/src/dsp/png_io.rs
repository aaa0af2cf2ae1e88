//! 8-bit PNG encode/decode for intensity grids and RGB overlays.

use std::fs::File;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use crate::error::{Error, Result};

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Intensity in [0, 1] to a byte, rounding half up.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) as f64 * 255.0 + 0.5).floor() as u8
}

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(Cursor::new(&mut out), width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Default);
        enc.set_filter(png::FilterType::NoFilter);
        enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::Data(format!("png encode: {e}")))?;
        w.write_image_data(data)
            .map_err(|e| Error::Data(format!("png encode: {e}")))?;
    }
    Ok(out)
}

pub fn encode_gray(width: usize, height: usize, pixels: &[f32]) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = pixels.iter().map(|&v| quantize(v)).collect();
    encode(width, height, png::ColorType::Grayscale, &bytes)
}

pub fn write_gray(path: &Path, width: usize, height: usize, pixels: &[f32]) -> Result<()> {
    let bytes = encode_gray(width, height, pixels)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// RGB triples in [0, 1].
pub fn write_rgb(path: &Path, width: usize, height: usize, rgb: &[[f32; 3]]) -> Result<()> {
    let bytes: Vec<u8> = rgb.iter().flat_map(|p| p.map(quantize)).collect();
    let data = encode(width, height, png::ColorType::Rgb, &bytes)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    std::io::Write::write_all(&mut w, &data).map_err(|e| Error::io(path, e))
}

/// Decode an 8-bit grayscale PNG to intensities `byte / 255`.
pub fn read_gray(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(png_err(
            path,
            format!("expected 8-bit grayscale, got {:?} {:?}", info.color_type, info.bit_depth),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let pixels = buf[..w * h].iter().map(|&b| b as f32 / 255.0).collect();
    Ok((w, h, pixels))
}
