//! Correlating individual pre-activation units with log F0, and the receptive-field bound
//! on which layer could first represent a feature.

use serde::{Deserialize, Serialize};

use super::align::frame_align_preactivations;
use super::probe::{FeatureUtterance, MIN_PROBE_FRAMES};
use super::stats::spearman_rho;
use crate::dsp::FeatureKind;
use crate::error::{Error, Result};
use crate::wavenet::ModelConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreactCorrelation {
    pub layer: usize,
    /// Largest |rho| over non-constant units; `None` when every unit is constant.
    pub max_abs_rho: Option<f64>,
    /// Unit index: `0..width` are filter terms, `width..2 width` gate terms.
    pub unit: Option<usize>,
    /// Signed rho of that unit.
    pub rho: Option<f64>,
    pub n_constant: usize,
    pub n_frames: usize,
}

/// Per residual layer, the unit whose filter or gate pre-activation best rank-correlates
/// with log F0 over voiced frames pooled across utterances.
pub fn preactivation_f0_correlation(utts: &[FeatureUtterance<'_>]) -> Result<Vec<PreactCorrelation>> {
    let first = utts.first().ok_or_else(|| Error::invalid("no utterances"))?;
    let n_layers = first.acts.n_layers();
    if first.acts.preactivations.is_none() {
        return Err(Error::invalid("dump holds no pre-activations (capture them when dumping)"));
    }
    let mut out = Vec::with_capacity(n_layers.saturating_sub(1));
    for layer in 1..n_layers {
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut f0 = Vec::new();
        for u in utts {
            if u.track.kind != FeatureKind::LogF0 {
                return Err(Error::invalid("pre-activation correlation needs a log-F0 track"));
            }
            if u.acts.n_layers() != n_layers {
                return Err(Error::invalid("dumps differ in layer count"));
            }
            let a = frame_align_preactivations(u.acts, layer, &u.track.frame_times, u.sample_rate)?;
            if columns.is_empty() {
                columns = vec![Vec::new(); a.rows.ncols()];
            }
            for (r, &fi) in a.frames.iter().enumerate() {
                if !u.track.is_voiced(fi) {
                    continue;
                }
                f0.push(u.track.frame(fi)[0]);
                for (c, col) in columns.iter_mut().enumerate() {
                    col.push(a.rows[[r, c]]);
                }
            }
        }
        if f0.len() < MIN_PROBE_FRAMES {
            return Err(Error::insufficient("voiced frames", MIN_PROBE_FRAMES, f0.len()));
        }
        let mut best: Option<(usize, f64)> = None;
        let mut n_constant = 0;
        for (unit, col) in columns.iter().enumerate() {
            match spearman_rho(col, &f0)? {
                None => n_constant += 1,
                Some(r) => {
                    if best.map_or(true, |(_, b)| r.abs() > b.abs()) {
                        best = Some((unit, r));
                    }
                }
            }
        }
        out.push(PreactCorrelation {
            layer,
            max_abs_rho: best.map(|b| b.1.abs()),
            unit: best.map(|b| b.0),
            rho: best.map(|b| b.1),
            n_constant,
            n_frames: f0.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerLimit {
    Layer(usize),
    /// Longer than the whole network's receptive field.
    BeyondNetwork,
}

/// Smallest layer (0 = embedding) whose cumulative receptive field covers
/// `duration_samples`.
pub fn theoretical_layer_limit(duration_samples: usize, config: &ModelConfig) -> Result<LayerLimit> {
    if duration_samples == 0 {
        return Err(Error::invalid("feature duration must be positive"));
    }
    config.validate()?;
    Ok(config
        .cumulative_receptive_fields()
        .iter()
        .position(|&f| f >= duration_samples)
        .map_or(LayerLimit::BeyondNetwork, LayerLimit::Layer))
}
