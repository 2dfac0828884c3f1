//! 8-bit mu-law companding.
//!
//! The companded value `F(x) = sign(x) ln(1 + mu|x|) / ln(1 + mu)` is quantized on a
//! uniform grid of step `1/128` with code 128 sitting exactly on zero. Code 0 decodes to
//! -1 and code 255 to `F^-1(127/128)`; inputs above the last level saturate into 255.

use super::buffer::AudioBuffer;
use crate::error::{Error, Result};

pub const MU: f64 = 255.0;
pub const LEVELS: usize = 256;
/// Code assigned to a zero-valued sample.
pub const MIDPOINT_CODE: u8 = 128;

const HALF_LEVELS: f64 = 128.0;

/// Sequence of 8-bit mu-law codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedSignal {
    pub codes: Vec<u8>,
    pub sample_rate: u32,
}

impl QuantizedSignal {
    pub fn new(codes: Vec<u8>, sample_rate: u32) -> Self {
        Self { codes, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

pub fn compand(x: f64) -> f64 {
    x.signum() * (1.0 + MU * x.abs()).ln() / (1.0 + MU).ln()
}

pub fn expand(y: f64) -> f64 {
    y.signum() * ((1.0 + MU).powf(y.abs()) - 1.0) / MU
}

pub fn encode_sample(x: f64) -> u8 {
    let level = (compand(x.clamp(-1.0, 1.0)) * HALF_LEVELS).round() + HALF_LEVELS;
    level.clamp(0.0, (LEVELS - 1) as f64) as u8
}

pub fn decode_sample(code: u8) -> f64 {
    expand((code as f64 - HALF_LEVELS) / HALF_LEVELS)
}

/// Reconstruction amplitude of every code, indexed by code.
pub fn decode_table() -> [f64; LEVELS] {
    let mut table = [0.0; LEVELS];
    for (c, v) in table.iter_mut().enumerate() {
        *v = decode_sample(c as u8);
    }
    table
}

pub fn mu_law_encode(x: &AudioBuffer) -> Result<QuantizedSignal> {
    encode_slice(x.samples(), x.sample_rate())
}

pub fn encode_slice(samples: &[f32], sample_rate: u32) -> Result<QuantizedSignal> {
    let mut codes = Vec::with_capacity(samples.len());
    for (i, &s) in samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        codes.push(encode_sample(s as f64));
    }
    Ok(QuantizedSignal { codes, sample_rate })
}

pub fn mu_law_decode(q: &QuantizedSignal) -> AudioBuffer {
    let table = decode_table();
    let samples = q.codes.iter().map(|&c| table[c as usize] as f32).collect();
    AudioBuffer::new(samples, q.sample_rate).expect("decoded levels lie in [-1, 1]")
}
