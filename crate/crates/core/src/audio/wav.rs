//! Minimal RIFF/WAVE reader and writer for 16-bit PCM mono files.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::buffer::AudioBuffer;
use crate::error::{Error, Result};

const PCM_FORMAT: u16 = 1;
const EXTENSIBLE_FORMAT: u16 = 0xFFFE;

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let bytes = fs::read(path)?;
    parse_wav(&bytes)
}

pub fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 {
        return Err(Error::parse("RIFF", "file shorter than the 12-byte RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::parse("RIFF", "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::parse("RIFF", "form type is not WAVE"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = LittleEndian::read_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let name = String::from_utf8_lossy(id).into_owned();
        match id {
            b"fmt " => {
                if size < 16 || body_start + 16 > bytes.len() {
                    return Err(Error::parse("fmt ", "chunk too short"));
                }
                let b = &bytes[body_start..];
                let tag = LittleEndian::read_u16(&b[0..2]);
                let channels = LittleEndian::read_u16(&b[2..4]);
                let rate = LittleEndian::read_u32(&b[4..8]);
                let bits = LittleEndian::read_u16(&b[14..16]);
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    fmt.ok_or_else(|| Error::parse("data", "data chunk precedes fmt chunk"))?;
                if tag != PCM_FORMAT && tag != EXTENSIBLE_FORMAT {
                    return Err(Error::parse("fmt ", format!("unsupported format tag {tag}")));
                }
                if channels != 1 {
                    return Err(Error::parse(
                        "fmt ",
                        format!("expected mono, found {channels} channels"),
                    ));
                }
                if bits != 16 {
                    return Err(Error::parse(
                        "fmt ",
                        format!("unsupported bit depth {bits}, expected 16"),
                    ));
                }
                if rate == 0 {
                    return Err(Error::parse("fmt ", "sample rate is zero"));
                }
                let end = (body_start + size).min(bytes.len());
                let data = &bytes[body_start..end];
                let samples = data
                    .chunks_exact(2)
                    .map(|c| LittleEndian::read_i16(c) as f32 / 32768.0)
                    .collect();
                return AudioBuffer::new(samples, rate);
            }
            _ => {
                if body_start + size > bytes.len() {
                    return Err(Error::parse(name, "chunk extends past end of file"));
                }
            }
        }
        // chunks are word aligned
        pos = body_start + size + (size & 1);
    }
    Err(Error::parse("data", "no data chunk found"))
}

pub fn encode_wav(audio: &AudioBuffer) -> Vec<u8> {
    let n = audio.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&audio.sample_rate().to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in audio.samples() {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_wav(audio))?;
    Ok(())
}
