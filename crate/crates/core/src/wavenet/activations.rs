//! Captured activations and their on-disk form.
//!
//! A dump file (`WNAC`) is a little-endian header
//!
//! | field      | type | meaning                                             |
//! |------------|------|-----------------------------------------------------|
//! | magic      | 4 B  | `WNAC`                                              |
//! | version    | u32  | 1                                                   |
//! | n_layers   | u32  | stored layers, layer 0 is the embedding             |
//! | width      | u32  | channels per layer                                  |
//! | n_steps    | u64  | stored time steps                                   |
//! | flags      | u32  | bit 0: pre-activations follow; bits 16..32: decimation |
//!
//! followed by `n_layers * n_steps * width` f32 values (layer, time, channel order) and,
//! when flagged, `(n_layers - 1) * n_steps * 2 width` pre-activation values.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{s, Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const WNAC_MAGIC: &[u8; 4] = b"WNAC";
pub const WNAC_VERSION: u32 = 1;
const FLAG_PREACTS: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTensor {
    /// `[n_layers x n_steps x width]`; index 0 is the embedding output.
    pub layer_outputs: Array3<f32>,
    /// `[n_layers - 1 x n_steps x 2 width]` for residual layers `1..n_layers`.
    pub preactivations: Option<Array3<f32>>,
    /// Stored step `i` is sample `i * decimation`.
    pub decimation: usize,
}

fn stack(mats: &[Array2<f32>]) -> Array3<f32> {
    let views: Vec<ArrayView2<f32>> = mats.iter().map(|m| m.view()).collect();
    ndarray::stack(Axis(0), &views).expect("equal shapes")
}

impl ActivationTensor {
    pub(crate) fn from_layers(outputs: Vec<Array2<f32>>, preacts: Option<Vec<Array2<f32>>>, decimation: usize) -> Self {
        let preactivations = preacts.filter(|p| !p.is_empty()).map(|p| stack(&p));
        ActivationTensor {
            layer_outputs: stack(&outputs),
            preactivations,
            decimation,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layer_outputs.len_of(Axis(0))
    }

    pub fn n_steps(&self) -> usize {
        self.layer_outputs.len_of(Axis(1))
    }

    pub fn width(&self) -> usize {
        self.layer_outputs.len_of(Axis(2))
    }

    /// `[n_steps x width]` view of one layer.
    pub fn layer(&self, idx: usize) -> ArrayView2<'_, f32> {
        self.layer_outputs.index_axis(Axis(0), idx)
    }

    /// Pre-activations of residual layer `idx >= 1`.
    pub fn preactivation(&self, idx: usize) -> Option<ArrayView2<'_, f32>> {
        let p = self.preactivations.as_ref()?;
        (idx >= 1 && idx <= p.len_of(Axis(0))).then(|| p.index_axis(Axis(0), idx - 1))
    }

    /// Sample index of stored step `i`.
    pub fn sample_of(&self, step: usize) -> usize {
        step * self.decimation
    }

    /// Keep layers `0..=max_layer`.
    pub fn truncate_layers(&mut self, max_layer: usize) {
        let keep = (max_layer + 1).min(self.n_layers());
        self.layer_outputs = self.layer_outputs.slice(s![..keep, .., ..]).to_owned();
        if let Some(p) = &self.preactivations {
            let k = keep.saturating_sub(1);
            self.preactivations = (k > 0).then(|| p.slice(s![..k, .., ..]).to_owned());
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 4 * self.layer_outputs.len());
        out.extend_from_slice(WNAC_MAGIC);
        out.write_u32::<LE>(WNAC_VERSION).unwrap();
        out.write_u32::<LE>(self.n_layers() as u32).unwrap();
        out.write_u32::<LE>(self.width() as u32).unwrap();
        out.write_u64::<LE>(self.n_steps() as u64).unwrap();
        let mut flags = (self.decimation as u32) << 16;
        if self.preactivations.is_some() {
            flags |= FLAG_PREACTS;
        }
        out.write_u32::<LE>(flags).unwrap();
        for v in self.layer_outputs.iter() {
            out.write_f32::<LE>(*v).unwrap();
        }
        if let Some(p) = &self.preactivations {
            for v in p.iter() {
                out.write_f32::<LE>(*v).unwrap();
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::parse("WNAC", "file shorter than its header"))?;
        if &magic != WNAC_MAGIC {
            return Err(Error::Format("not an activation dump (bad magic)".into()));
        }
        let hdr = |e: std::io::Error| Error::parse("WNAC", format!("truncated header: {e}"));
        let version = r.read_u32::<LE>().map_err(hdr)?;
        if version != WNAC_VERSION {
            return Err(Error::Format(format!("unsupported activation dump version {version}")));
        }
        let n_layers = r.read_u32::<LE>().map_err(hdr)? as usize;
        let width = r.read_u32::<LE>().map_err(hdr)? as usize;
        let n_steps = r.read_u64::<LE>().map_err(hdr)? as usize;
        let flags = r.read_u32::<LE>().map_err(hdr)?;
        if n_layers == 0 || width == 0 {
            return Err(Error::parse("WNAC", "zero layers or width"));
        }
        let decimation = ((flags >> 16) as usize).max(1);
        let has_pre = flags & FLAG_PREACTS != 0 && n_layers > 1;
        let n_out = n_layers * n_steps * width;
        let n_pre = if has_pre { (n_layers - 1) * n_steps * 2 * width } else { 0 };
        let body = &bytes[r.position() as usize..];
        if body.len() != 4 * (n_out + n_pre) {
            return Err(Error::parse(
                "WNAC",
                format!("expected {} payload bytes, found {}", 4 * (n_out + n_pre), body.len()),
            ));
        }
        let floats: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let layer_outputs = Array3::from_shape_vec((n_layers, n_steps, width), floats[..n_out].to_vec())
            .expect("length checked");
        let preactivations = has_pre.then(|| {
            Array3::from_shape_vec((n_layers - 1, n_steps, 2 * width), floats[n_out..].to_vec())
                .expect("length checked")
        });
        Ok(ActivationTensor {
            layer_outputs,
            preactivations,
            decimation,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}
