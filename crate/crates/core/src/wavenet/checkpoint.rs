//! `WNCK` checkpoints: magic, u32 version, u32 JSON length, the JSON model configuration,
//! then every parameter tensor as little-endian f32 in [`Model::named_tensors`] order.

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::model::{Model, Real};
use crate::error::{Error, Result};

pub const WNCK_MAGIC: &[u8; 4] = b"WNCK";
pub const WNCK_VERSION: u32 = 1;

pub fn encode_checkpoint<F: Real>(model: &Model<F>) -> Vec<u8> {
    let cfg = serde_json::to_vec(&model.config).expect("config serializes");
    let mut out = Vec::with_capacity(12 + cfg.len() + 4 * model.n_params());
    out.extend_from_slice(WNCK_MAGIC);
    out.extend_from_slice(&WNCK_VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    for (_, t) in model.named_tensors() {
        for v in t {
            out.extend_from_slice(&v.to_f32().unwrap().to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint<F: Real>(bytes: &[u8]) -> Result<Model<F>> {
    if bytes.len() < 12 {
        return Err(Error::parse("WNCK", "file shorter than its header"));
    }
    if &bytes[..4] != WNCK_MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != WNCK_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let cfg_len = word(8) as usize;
    let cfg_end = 12 + cfg_len;
    if bytes.len() < cfg_end {
        return Err(Error::parse("WNCK", "truncated configuration block"));
    }
    let config: ModelConfig = serde_json::from_slice(&bytes[12..cfg_end])
        .map_err(|e| Error::parse("WNCK", format!("configuration: {e}")))?;
    let mut model = Model::<F>::zeros(&config)?;
    let body = &bytes[cfg_end..];
    if body.len() != 4 * model.n_params() {
        return Err(Error::parse(
            "WNCK",
            format!("expected {} parameter bytes, found {}", 4 * model.n_params(), body.len()),
        ));
    }
    let mut vals = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for t in model.tensors_mut() {
        for v in t.iter_mut() {
            *v = F::from_f32(vals.next().unwrap()).unwrap();
        }
    }
    Ok(model)
}

pub fn save_checkpoint<F: Real>(model: &Model<F>, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint<F: Real>(path: &Path) -> Result<Model<F>> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_in_f32() {
        let m = Model::<f32>::init(&ModelConfig::toy(), 11).unwrap();
        let back: Model<f32> = decode_checkpoint(&encode_checkpoint(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_corruption() {
        let m = Model::<f32>::init(&ModelConfig::toy(), 11).unwrap();
        let mut bytes = encode_checkpoint(&m);
        assert!(matches!(decode_checkpoint::<f32>(b"WNAC12345678"), Err(Error::Format(_))));
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(decode_checkpoint::<f32>(&bytes), Err(Error::Parse { .. })));
    }
}
