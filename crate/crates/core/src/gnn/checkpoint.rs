use super::{GnnError, ModelConfig, ModelWeights};
use crate::generator::Normalization;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"GATRESv1\n";

/// Trained weights with everything needed to use them: the architecture,
/// the pressure scaling of each network seen in training and free-form
/// provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub weights: ModelWeights,
    /// Normalization by network name.
    pub normalization: BTreeMap<String, Normalization>,
    pub provenance: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorHeader>,
    normalization: BTreeMap<String, Normalization>,
    provenance: serde_json::Value,
}

/// Layout: magic line, little-endian `u64` header length, JSON header, then
/// every tensor as little-endian `f64` in header order.
pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), GnnError> {
    let tensors = ckpt.weights.tensors();
    let header = Header {
        config: ckpt.config.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorHeader {
                name: name.clone(),
                shape: [t.nrows(), t.ncols()],
            })
            .collect(),
        normalization: ckpt.normalization.clone(),
        provenance: ckpt.provenance.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| GnnError::Checkpoint(e.to_string()))?;
    let mut bytes = Vec::with_capacity(json.len() + 8 * ckpt.weights.parameter_count() + 17);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for (_, t) in &tensors {
        for v in t.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, GnnError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| GnnError::Checkpoint(m.to_string());
    if bytes.len() < 17 || &bytes[..9] != CHECKPOINT_MAGIC {
        return Err(bad("not a GATRes checkpoint"));
    }
    let len = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(17..17 + len).ok_or_else(|| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(body).map_err(|e| GnnError::Checkpoint(e.to_string()))?;
    let mut weights = ModelWeights::zeros(&header.config);
    let mut offset = 17 + len;
    let slots = weights.tensors_mut();
    if slots.len() != header.tensors.len() {
        return Err(bad("tensor count does not match the configuration"));
    }
    for ((name, t), h) in slots.into_iter().zip(&header.tensors) {
        if name != h.name || [t.nrows(), t.ncols()] != h.shape {
            return Err(GnnError::Checkpoint(format!("tensor {} does not fit {name}", h.name)));
        }
        let end = offset + 8 * t.len();
        let data = bytes.get(offset..end).ok_or_else(|| bad("truncated tensor data"))?;
        for (v, chunk) in t.iter_mut().zip(data.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        offset = end;
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok(Checkpoint {
        config: header.config,
        weights,
        normalization: header.normalization,
        provenance: header.provenance,
    })
}
