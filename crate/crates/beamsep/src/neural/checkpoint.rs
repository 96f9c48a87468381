//! Versioned binary checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset  size      content
//! 0       4         magic bytes "BSCK"
//! 4       4         format version, u32 (currently 1)
//! 8       8         header length H, u64
//! 16      H         header: UTF-8 JSON (see below)
//! 16+H    8*total   parameter payload: f64 little-endian values,
//!                   concatenated in header order, row-major per array
//! ```
//!
//! The JSON header has two fields: `meta`, an arbitrary JSON object the
//! caller uses to echo its configuration (microphones, STFT setup, cRF
//! half-widths, layer sizes, feature layout), and `params`, an ordered
//! list of `{ "name": string, "shape": [usize...] }` entries describing
//! the payload.

use super::autodiff::Tensor;
use crate::error::{Error, Result};
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"BSCK";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    params: Vec<ParamEntry>,
}

/// Write a checkpoint: `meta` is echoed verbatim, parameters are stored
/// in the given order.
pub fn save(path: impl AsRef<Path>, meta: &serde_json::Value, params: &[(String, Tensor)]) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        meta: meta.clone(),
        params: params
            .iter()
            .map(|(name, t)| ParamEntry {
                name: name.clone(),
                shape: t.shape(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Checkpoint(format!("header serialization: {e}")))?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(MAGIC).map_err(|e| Error::io(path, e))?;
    file.write_all(&VERSION.to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    file.write_all(&header_bytes).map_err(|e| Error::io(path, e))?;
    let mut payload = Vec::new();
    for (_, t) in params {
        for v in t.data().iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    file.write_all(&payload).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// A checkpoint read back into memory.
#[derive(Debug)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub params: Vec<(String, ArrayD<f64>)>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&ArrayD<f64>> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
    }

    /// Copy stored values into live parameter tensors by name. Every live
    /// parameter must be present with a matching shape.
    pub fn load_into(&self, params: &[(String, Tensor)]) -> Result<()> {
        for (name, tensor) in params {
            let stored = self.get(name).ok_or_else(|| {
                Error::Checkpoint(format!("parameter {name} missing from checkpoint"))
            })?;
            if stored.shape() != tensor.shape().as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: shape {:?} in checkpoint, {:?} in model",
                    stored.shape(),
                    tensor.shape()
                )));
            }
            tensor.set_data(stored.clone());
        }
        Ok(())
    }
}

/// Read a checkpoint file.
pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {magic:?} in {}",
            path.display()
        )));
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let mut len8 = [0u8; 8];
    file.read_exact(&mut len8).map_err(|e| Error::io(path, e))?;
    let header_len = u64::from_le_bytes(len8) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)
        .map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Checkpoint(format!("header parse: {e}")))?;
    let mut params = Vec::with_capacity(header.params.len());
    let mut buf8 = [0u8; 8];
    for entry in header.params {
        let n: usize = entry.shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            file.read_exact(&mut buf8).map_err(|e| Error::io(path, e))?;
            data.push(f64::from_le_bytes(buf8));
        }
        let arr = ArrayD::from_shape_vec(IxDyn(&entry.shape), data)
            .map_err(|e| Error::Checkpoint(format!("parameter {}: {e}", entry.name)))?;
        params.push((entry.name, arr));
    }
    Ok(Checkpoint {
        meta: header.meta,
        params,
    })
}
