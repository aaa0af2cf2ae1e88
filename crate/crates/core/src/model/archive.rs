//! Named-tensor archive in the checkpoint container layout, with a free-form
//! JSON `metadata` object in place of a model config.

use serde::{Deserialize, Serialize};

use super::checkpoint::{FORMAT_VERSION, MAGIC, PREFIX};
use super::TensorEntry;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Serialize, Deserialize)]
struct Header {
    tensors: Vec<TensorEntry>,
    metadata: serde_json::Value,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Data(format!("tensor archive: {}", msg.into()))
}

pub fn encode(named: &[(String, &Tensor)], metadata: &serde_json::Value) -> Result<Vec<u8>> {
    let mut offset = 0u64;
    let mut tensors = Vec::with_capacity(named.len());
    for (name, t) in named {
        let length = 4 * t.len() as u64;
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
            length,
        });
        offset += length;
    }
    let header = serde_json::to_vec(&Header {
        tensors,
        metadata: metadata.clone(),
    })?;
    let mut out = Vec::with_capacity(PREFIX + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, t) in named {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(Vec<(String, Tensor)>, serde_json::Value)> {
    if bytes.len() < PREFIX || &bytes[..4] != MAGIC {
        return Err(bad("bad magic or truncated prefix"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let start = PREFIX
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[PREFIX..start]).map_err(|e| bad(e.to_string()))?;
    let blobs = &bytes[start..];
    let mut out = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        let end = (e.offset as usize).checked_add(e.length as usize);
        match end {
            Some(end) if e.length == 4 * n as u64 && end <= blobs.len() => {
                let data = blobs[e.offset as usize..end]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                out.push((e.name, Tensor::new(e.shape, data)?));
            }
            _ => return Err(bad(format!("{}: blob out of range", e.name))),
        }
    }
    Ok((out, header.metadata))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = Tensor::new(vec![2, 2], vec![1.0, -2.5, 3.0, 0.0]).unwrap();
        let meta = serde_json::json!({"method": "gradcam"});
        let bytes = encode(&[("saliency".into(), &t)], &meta).unwrap();
        let (tensors, m) = decode(&bytes).unwrap();
        assert_eq!(tensors, vec![("saliency".to_string(), t)]);
        assert_eq!(m, meta);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
