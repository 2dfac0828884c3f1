//! Baseband/wideband split of activation channels and per-layer singular value profiles.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::jacobi::singular_values;
use crate::dsp::{linkwitz_riley_split, FilterMode, CROSSOVER_HZ};
use crate::error::{Error, Result};
use crate::wavenet::ActivationTensor;

/// Singular values within this many dB of the largest count towards the tail length.
pub const TAIL_DB: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Baseband,
    Wideband,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Baseband => "baseband",
            Band::Wideband => "wideband",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpectrum {
    pub band: Band,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub frobenius_sq: f64,
    /// `exp` of the entropy of the normalised squared singular values.
    pub effective_rank: f64,
    pub tail_length: usize,
}

impl BandSpectrum {
    pub fn from_matrix(band: Band, m: &Array2<f64>) -> Result<Self> {
        let singular_values = singular_values(m.view())?;
        let frobenius_sq = m.iter().map(|v| v * v).sum();
        Ok(BandSpectrum {
            band,
            effective_rank: effective_rank(&singular_values),
            tail_length: tail_length(&singular_values),
            singular_values,
            frobenius_sq,
        })
    }

    /// `log10` of each singular value; exact zeros map to the smallest positive double.
    pub fn log10_values(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s.max(f64::MIN_POSITIVE).log10()).collect()
    }
}

pub fn effective_rank(sv: &[f64]) -> f64 {
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    let h: f64 = sv
        .iter()
        .map(|s| s * s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h.exp()
}

pub fn tail_length(sv: &[f64]) -> usize {
    match sv.first() {
        Some(&top) if top > 0.0 => {
            let thresh = top * 10f64.powf(-TAIL_DB / 20.0);
            sv.iter().filter(|&&s| s >= thresh).count()
        }
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerScan {
    pub layer: usize,
    pub baseband: BandSpectrum,
    pub wideband: BandSpectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdScan {
    pub layers: Vec<LayerScan>,
    pub n_steps: usize,
    /// Rate of the stored activation steps.
    pub step_rate_hz: f64,
    pub crossover_hz: f64,
    pub mode: FilterMode,
}

/// Per-channel mean removal, then the 80 Hz crossover applied to each channel.
/// Returns `(baseband, wideband)`, both `[n_steps x width]`.
pub fn split_activations(
    acts: &ActivationTensor,
    layer: usize,
    sample_rate: u32,
    mode: FilterMode,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if layer >= acts.n_layers() {
        return Err(Error::invalid(format!(
            "layer {layer} out of range (dump holds {} layers)",
            acts.n_layers()
        )));
    }
    let rate = sample_rate as f64 / acts.decimation as f64;
    let m = acts.layer(layer);
    let (t, w) = m.dim();
    let mut base = Array2::zeros((t, w));
    let mut wide = Array2::zeros((t, w));
    for c in 0..w {
        let col: Vec<f64> = m.column(c).iter().map(|&v| f64::from(v)).collect();
        let mean = col.iter().sum::<f64>() / t.max(1) as f64;
        let centred: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let (lo, hi) = linkwitz_riley_split(&centred, CROSSOVER_HZ, rate, mode)?;
        base.column_mut(c).assign(&ndarray::Array1::from(lo));
        wide.column_mut(c).assign(&ndarray::Array1::from(hi));
    }
    Ok((base, wide))
}

pub fn svd_scan(acts: &ActivationTensor, sample_rate: u32) -> Result<SvdScan> {
    svd_scan_with(acts, sample_rate, FilterMode::Causal)
}

pub fn svd_scan_with(acts: &ActivationTensor, sample_rate: u32, mode: FilterMode) -> Result<SvdScan> {
    let min_steps = acts.width().max(64);
    if acts.n_steps() < min_steps {
        return Err(Error::insufficient(
            "activation time steps (use longer evaluation audio or less decimation)",
            min_steps,
            acts.n_steps(),
        ));
    }
    let layers = (0..acts.n_layers())
        .map(|layer| {
            let (b, w) = split_activations(acts, layer, sample_rate, mode)?;
            Ok(LayerScan {
                layer,
                baseband: BandSpectrum::from_matrix(Band::Baseband, &b)?,
                wideband: BandSpectrum::from_matrix(Band::Wideband, &w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvdScan {
        layers,
        n_steps: acts.n_steps(),
        step_rate_hz: sample_rate as f64 / acts.decimation as f64,
        crossover_hz: CROSSOVER_HZ,
        mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer: usize,
    pub baseband_effective_rank: f64,
    pub wideband_effective_rank: f64,
    pub baseband_tail_length: usize,
    pub wideband_tail_length: usize,
    pub baseband_frobenius_sq: f64,
    pub wideband_frobenius_sq: f64,
}

impl SvdScan {
    /// Rows `layer,band,index,singular_value,log10_value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["layer", "band", "index", "singular_value", "log10_value"])?;
        for l in &self.layers {
            for spec in [&l.baseband, &l.wideband] {
                for (i, (s, lg)) in spec.singular_values.iter().zip(spec.log10_values()).enumerate() {
                    w.write_record([
                        l.layer.to_string(),
                        spec.band.as_str().to_string(),
                        i.to_string(),
                        format!("{s:e}"),
                        format!("{lg}"),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> Vec<LayerSummary> {
        self.layers
            .iter()
            .map(|l| LayerSummary {
                layer: l.layer,
                baseband_effective_rank: l.baseband.effective_rank,
                wideband_effective_rank: l.wideband.effective_rank,
                baseband_tail_length: l.baseband.tail_length,
                wideband_tail_length: l.wideband.tail_length,
                baseband_frobenius_sq: l.baseband.frobenius_sq,
                wideband_frobenius_sq: l.wideband.frobenius_sq,
            })
            .collect()
    }
}
