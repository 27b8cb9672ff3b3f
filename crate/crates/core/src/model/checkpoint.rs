//! Checkpoint container: magic, format version, a JSON header with the
//! config and tensor shapes, then every tensor as little-endian f32.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{param_shapes, ModelParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TTSMCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<(String, Vec<usize>)>,
}

pub fn to_bytes(cfg: &ModelConfig, params: &ModelParams<f32>) -> Result<Vec<u8>> {
    let header = Header {
        config: cfg.clone(),
        tensors: params.tensors().into_iter().map(|(n, t)| (n, t.shape.clone())).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(json.len() + 4 * params.count() + 20);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in params.tensors() {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<(ModelConfig, ModelParams<f32>)> {
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if bytes.len() < n {
            return Err(Error::TruncatedCheckpoint(format!("file ends inside {what}")));
        }
        let (head, rest) = bytes.split_at(n);
        bytes = rest;
        Ok(head)
    };
    let magic = take(8, "magic").map_err(|_| Error::NotACheckpoint)?;
    if magic != MAGIC {
        return Err(Error::NotACheckpoint);
    }
    let version = u32::from_le_bytes(take(4, "version")?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion { found: version, expected: FORMAT_VERSION });
    }
    let hlen = u64::from_le_bytes(take(8, "header length")?.try_into().expect("8 bytes")) as usize;
    let header: Header = serde_json::from_slice(take(hlen, "header")?)?;
    let cfg = header.config;
    cfg.validate()?;
    let expected = param_shapes(&cfg);
    if expected.len() != header.tensors.len() {
        return Err(Error::ShapeMismatch(format!(
            "config implies {} tensors, file has {}",
            expected.len(),
            header.tensors.len()
        )));
    }
    for ((name, want), (fname, found)) in expected.iter().zip(&header.tensors) {
        if name != fname {
            return Err(Error::ShapeMismatch(format!("expected tensor {name}, file has {fname}")));
        }
        if want != found {
            return Err(Error::TensorShape { name: name.clone(), expected: want.clone(), found: found.clone() });
        }
    }
    let mut params = ModelParams::<f32>::zeros(&cfg);
    for (name, t) in params.tensors_mut() {
        let raw = take(4 * t.len(), &format!("tensor {name}"))?;
        for (v, b) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().expect("4 bytes"));
        }
    }
    if !bytes.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} trailing bytes after last tensor", bytes.len())));
    }
    Ok((cfg, params))
}

pub fn save_params(cfg: &ModelConfig, params: &ModelParams<f32>, path: &Path) -> Result<()> {
    let bytes = to_bytes(cfg, params)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<(ModelConfig, ModelParams<f32>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
