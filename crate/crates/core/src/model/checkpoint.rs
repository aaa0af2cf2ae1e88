//! `BWXA` container: magic, u16 version, u32 header length, JSON header,
//! then little-endian f32 blobs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cnn::{assemble, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::{AdamConfig, AdamState, Tensor};

pub const MAGIC: &[u8; 4] = b"BWXA";
pub const FORMAT_VERSION: u16 = 1;
pub(super) const PREFIX: usize = 4 + 2 + 4;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Option<AdamConfig>,
    #[serde(default)]
    pub optimizer_steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub length: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
    metadata: TrainingMetadata,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub metadata: TrainingMetadata,
    /// Adam moments, when the checkpoint was saved mid-training.
    pub optimizer: Option<AdamState>,
}

fn ckpt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn encode_checkpoint(model: &Model, metadata: &TrainingMetadata, optimizer: Option<&AdamState>) -> Result<Vec<u8>> {
    let names = model.parameter_names();
    let params = model.net.params();
    let mut named: Vec<(String, &Tensor)> = names.iter().cloned().zip(params.iter().copied()).collect();
    let mut metadata = metadata.clone();
    if let Some(opt) = optimizer {
        if opt.first_moment.len() != names.len() {
            return Err(Error::shape("save_checkpoint", "optimizer state does not match model"));
        }
        for (n, m) in names.iter().zip(&opt.first_moment) {
            named.push((format!("adam.m.{n}"), m));
        }
        for (n, v) in names.iter().zip(&opt.second_moment) {
            named.push((format!("adam.v.{n}"), v));
        }
        metadata.optimizer = Some(opt.config);
        metadata.optimizer_steps = opt.step_count;
    }
    let mut offset = 0u64;
    let tensors = named
        .iter()
        .map(|(name, t)| {
            let length = 4 * t.len() as u64;
            let e = TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
                length,
            };
            offset += length;
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        tensors,
        metadata,
    })?;
    let mut out = Vec::with_capacity(PREFIX + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, t) in &named {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < PREFIX {
        return Err(ckpt("file shorter than the fixed prefix"));
    }
    if &bytes[..4] != MAGIC {
        return Err(ckpt("bad magic, not a BWXA checkpoint"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(ckpt(format!(
            "unsupported format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let hlen = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let blobs_start = PREFIX
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| ckpt("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[PREFIX..blobs_start])
        .map_err(|e| ckpt(format!("header JSON: {e}")))?;
    let blobs = &bytes[blobs_start..];
    let expected: u64 = header.tensors.iter().map(|t| t.length).sum();
    if expected != blobs.len() as u64 {
        return Err(ckpt(format!(
            "tensor data is {} bytes, directory declares {expected}",
            blobs.len()
        )));
    }

    let read = |entry: &TensorEntry| -> Result<Tensor> {
        let n: usize = entry.shape.iter().product();
        if entry.length != 4 * n as u64 {
            return Err(ckpt(format!("{}: length {} for shape {:?}", entry.name, entry.length, entry.shape)));
        }
        let start = entry.offset as usize;
        let end = start
            .checked_add(entry.length as usize)
            .filter(|&e| e <= blobs.len())
            .ok_or_else(|| ckpt(format!("{}: blob out of range", entry.name)))?;
        let data = blobs[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(entry.shape.clone(), data).map_err(|e| ckpt(format!("{}: {e}", entry.name)))
    };
    let find = |name: &str| -> Result<Tensor> {
        let entry = header
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| ckpt(format!("missing tensor {name}")))?;
        read(entry)
    };

    let mut model = assemble(&header.config, None).map_err(|e| ckpt(format!("config: {e}")))?;
    let names = model.parameter_names();
    for (name, slot) in names.iter().zip(model.net.params_mut()) {
        let t = find(name)?;
        if t.shape() != slot.shape() {
            return Err(ckpt(format!(
                "{name}: stored shape {:?}, config implies {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }

    let optimizer = match header.metadata.optimizer {
        Some(config) => {
            let moments = |prefix: &str| -> Result<Vec<Tensor>> {
                names.iter().map(|n| find(&format!("{prefix}{n}"))).collect()
            };
            Some(AdamState {
                config,
                first_moment: moments("adam.m.")?,
                second_moment: moments("adam.v.")?,
                step_count: header.metadata.optimizer_steps,
            })
        }
        None => None,
    };
    Ok(Checkpoint {
        model,
        metadata: header.metadata,
        optimizer,
    })
}

pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    metadata: &TrainingMetadata,
    optimizer: Option<&AdamState>,
) -> Result<()> {
    let bytes = encode_checkpoint(model, metadata, optimizer)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
