//! Model parameter files.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "BGNNPRM1"
//! layer_count  u32
//! dims         layer_count x (in_dim u32, out_dim u32)
//! body         per layer: weight_means, weight_log_stds (out*in f64 each, row-major),
//!              bias_means, bias_log_stds (out f64 each)
//! ```
//!
//! The interaction config the model was built with is written next to it as
//! JSON, at the same path with extension `json`.

use std::path::{Path, PathBuf};

use super::{BayesianLayer, BgnnParams, InteractionConfig};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 8] = b"BGNNPRM1";

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_params(params: &BgnnParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * params.layers.len() + 8 * params.param_count());
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for l in &params.layers {
        out.extend_from_slice(&(l.in_dim as u32).to_le_bytes());
        out.extend_from_slice(&(l.out_dim as u32).to_le_bytes());
    }
    for v in params.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_params(bytes: &[u8]) -> Result<BgnnParams> {
    let bad = |m: &str| Error::parse("model parameters", m);
    if bytes.len() < 12 || &bytes[..8] != PARAMS_MAGIC {
        return Err(bad("missing magic header"));
    }
    let u32_at = |off: usize| -> Result<usize> {
        bytes
            .get(off..off + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
            .ok_or_else(|| bad("truncated header"))
    };
    let count = u32_at(8)?;
    let mut layers = Vec::with_capacity(count.min(1024));
    let mut off = 12;
    for _ in 0..count {
        let (i, o) = (u32_at(off)?, u32_at(off + 4)?);
        off += 8;
        layers.push(BayesianLayer {
            in_dim: i,
            out_dim: o,
            weight_means: vec![0.0; i * o],
            weight_log_stds: vec![0.0; i * o],
            bias_means: vec![0.0; o],
            bias_log_stds: vec![0.0; o],
        });
    }
    let mut params = BgnnParams { layers };
    let body = &bytes[off..];
    if body.len() != 8 * params.param_count() {
        return Err(bad(&format!(
            "body has {} bytes, dims require {}",
            body.len(),
            8 * params.param_count()
        )));
    }
    let flat: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    params.assign(&flat)?;
    params.validate()?;
    Ok(params)
}

pub fn write_params(path: &Path, params: &BgnnParams, cfg: &InteractionConfig) -> Result<()> {
    std::fs::write(path, encode_params(params)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(cfg)?;
    json.push('\n');
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

pub fn read_params(path: &Path) -> Result<(BgnnParams, InteractionConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let params = decode_params(&bytes)?;
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let cfg: InteractionConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    Ok((params, cfg))
}
