//! Frame-rate feature sequences and their CSV / `WNFT` serializations.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WNFT_MAGIC: &[u8; 4] = b"WNFT";
pub const WNFT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    LogF0,
    BandEnergyDb,
    WidebandMag,
    NarrowbandMag,
}

impl FeatureKind {
    fn code(self) -> u32 {
        match self {
            FeatureKind::LogF0 => 0,
            FeatureKind::BandEnergyDb => 1,
            FeatureKind::WidebandMag => 2,
            FeatureKind::NarrowbandMag => 3,
        }
    }

    fn from_code(code: u32) -> Result<Self> {
        Ok(match code {
            0 => FeatureKind::LogF0,
            1 => FeatureKind::BandEnergyDb,
            2 => FeatureKind::WidebandMag,
            3 => FeatureKind::NarrowbandMag,
            other => return Err(Error::Format(format!("unknown feature kind {other}"))),
        })
    }

    fn column_prefix(self) -> &'static str {
        match self {
            FeatureKind::LogF0 => "log_f0",
            FeatureKind::BandEnergyDb => "band",
            FeatureKind::WidebandMag | FeatureKind::NarrowbandMag => "bin",
        }
    }

    pub fn is_spectrum(self) -> bool {
        matches!(self, FeatureKind::WidebandMag | FeatureKind::NarrowbandMag)
    }
}

/// Uniform analysis framing: frame `i` covers samples `[i*hop, i*hop + window)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Framing {
    pub window: usize,
    pub hop: usize,
}

impl Framing {
    pub fn from_ms(window_ms: f64, hop_ms: f64, sample_rate: u32) -> Self {
        let to_samples = |ms: f64| ((ms * sample_rate as f64 / 1000.0).round() as usize).max(1);
        Self {
            window: to_samples(window_ms),
            hop: to_samples(hop_ms),
        }
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.window {
            0
        } else {
            (n_samples - self.window) / self.hop + 1
        }
    }

    pub fn start(&self, frame: usize) -> usize {
        frame * self.hop
    }

    /// Sample index at the frame center.
    pub fn center(&self, frame: usize) -> usize {
        frame * self.hop + self.window / 2
    }

    pub fn center_times(&self, n_samples: usize, sample_rate: u32) -> Vec<f64> {
        (0..self.n_frames(n_samples))
            .map(|i| self.center(i) as f64 / sample_rate as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack {
    pub kind: FeatureKind,
    pub frame_times: Vec<f64>,
    /// Row-major `[n_frames x dim]`.
    pub values: Vec<f64>,
    pub dim: usize,
    /// Voicing decisions; present for `LogF0` tracks only.
    pub voiced: Option<Vec<bool>>,
}

impl FeatureTrack {
    pub fn new(
        kind: FeatureKind,
        frame_times: Vec<f64>,
        values: Vec<f64>,
        dim: usize,
        voiced: Option<Vec<bool>>,
    ) -> Result<Self> {
        let n = frame_times.len();
        if dim == 0 || values.len() != n * dim {
            return Err(Error::invalid(format!(
                "track values length {} does not match {n} frames x {dim}",
                values.len()
            )));
        }
        if frame_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("frame times must be strictly increasing"));
        }
        if let Some(v) = &voiced {
            if v.len() != n {
                return Err(Error::invalid("voicing flags length mismatch"));
            }
        }
        Ok(Self {
            kind,
            frame_times,
            values,
            dim,
            voiced,
        })
    }

    pub fn empty(kind: FeatureKind, dim: usize) -> Self {
        Self {
            kind,
            frame_times: Vec::new(),
            values: Vec::new(),
            dim,
            voiced: if kind == FeatureKind::LogF0 {
                Some(Vec::new())
            } else {
                None
            },
        }
    }

    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_voiced(&self, i: usize) -> bool {
        self.voiced.as_ref().map_or(true, |v| v[i])
    }

    /// F0 in Hz for a voiced `LogF0` frame.
    pub fn f0_hz(&self, i: usize) -> Option<f64> {
        (self.kind == FeatureKind::LogF0 && self.is_voiced(i)).then(|| self.values[i].exp())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let mut header = vec!["time".to_string()];
        if self.dim == 1 && self.kind == FeatureKind::LogF0 {
            header.push("log_f0".into());
        } else {
            let p = self.kind.column_prefix();
            header.extend((0..self.dim).map(|i| format!("{p}_{i}")));
        }
        if self.voiced.is_some() {
            header.push("voiced".into());
        }
        w.write_record(&header)?;
        for i in 0..self.n_frames() {
            let mut rec = vec![format!("{}", self.frame_times[i])];
            rec.extend(self.frame(i).iter().map(|v| format!("{v}")));
            if let Some(v) = &self.voiced {
                rec.push(if v[i] { "1" } else { "0" }.into());
            }
            w.write_record(&rec)?;
        }
        Ok(())
    }

    /// Reads a CSV produced by [`FeatureTrack::write_csv`]. The kind is inferred from the header.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.first() != Some(&"time") {
            return Err(Error::parse("csv header", "first column must be `time`"));
        }
        let has_voiced = cols.last() == Some(&"voiced");
        let value_cols = cols.len() - 1 - usize::from(has_voiced);
        let kind = match cols.get(1).copied() {
            Some("log_f0") => FeatureKind::LogF0,
            Some(c) if c.starts_with("band_") => FeatureKind::BandEnergyDb,
            Some(c) if c.starts_with("bin_") => FeatureKind::NarrowbandMag,
            _ => return Err(Error::parse("csv header", "unrecognized value columns")),
        };
        let (mut times, mut values, mut voiced) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::parse("csv", format!("row {row} column {i} is not a number")))
            };
            times.push(num(0)?);
            for c in 0..value_cols {
                values.push(num(1 + c)?);
            }
            if has_voiced {
                voiced.push(num(1 + value_cols)? != 0.0);
            }
        }
        Self::new(kind, times, values, value_cols, has_voiced.then_some(voiced))
    }

    pub fn encode_wnft(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WNFT_MAGIC);
        let flags = u32::from(self.voiced.is_some());
        for v in [WNFT_VERSION, self.kind.code(), self.dim as u32] {
            out.write_u32::<LittleEndian>(v).unwrap();
        }
        out.write_u64::<LittleEndian>(self.n_frames() as u64).unwrap();
        out.write_u32::<LittleEndian>(flags).unwrap();
        for &t in &self.frame_times {
            out.write_f64::<LittleEndian>(t).unwrap();
        }
        for &v in &self.values {
            out.write_f32::<LittleEndian>(v as f32).unwrap();
        }
        if let Some(v) = &self.voiced {
            out.extend(v.iter().map(|&b| u8::from(b)));
        }
        out
    }

    pub fn decode_wnft(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 4];
        bytes
            .read_exact(&mut magic)
            .map_err(|_| Error::parse("WNFT header", "truncated"))?;
        if &magic != WNFT_MAGIC {
            return Err(Error::Format("not a WNFT feature file".into()));
        }
        let trunc = |_| Error::parse("WNFT header", "truncated");
        let version = bytes.read_u32::<LittleEndian>().map_err(trunc)?;
        if version != WNFT_VERSION {
            return Err(Error::Format(format!("unsupported WNFT version {version}")));
        }
        let kind = FeatureKind::from_code(bytes.read_u32::<LittleEndian>().map_err(trunc)?)?;
        let dim = bytes.read_u32::<LittleEndian>().map_err(trunc)? as usize;
        let n = bytes.read_u64::<LittleEndian>().map_err(trunc)? as usize;
        let flags = bytes.read_u32::<LittleEndian>().map_err(trunc)?;
        let body = |_| Error::parse("WNFT body", "truncated");
        let mut times = Vec::with_capacity(n);
        for _ in 0..n {
            times.push(bytes.read_f64::<LittleEndian>().map_err(body)?);
        }
        let mut values = Vec::with_capacity(n * dim);
        for _ in 0..n * dim {
            values.push(bytes.read_f32::<LittleEndian>().map_err(body)? as f64);
        }
        let voiced = if flags & 1 != 0 {
            if bytes.len() < n {
                return Err(Error::parse("WNFT body", "truncated voicing flags"));
            }
            Some(bytes[..n].iter().map(|&b| b != 0).collect())
        } else {
            None
        };
        Self::new(kind, times, values, dim, voiced)
    }

    pub fn write_wnft(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode_wnft())?;
        Ok(())
    }

    pub fn read_wnft(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode_wnft(&fs::read(path)?)
    }
}
